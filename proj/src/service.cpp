#include "xrsel/service.hpp"

#include <openssl/evp.h>

#include <httplib.h>

#include <cstdio>
#include <sstream>

#include "xrsel/error.hpp"

namespace xrsel {

using nlohmann::json;

struct SelectionService::Session {
    std::string id;
    Scene scene;
    std::shared_ptr<const PointCloud> cloud;
    std::shared_ptr<const DensityField> field;
    std::optional<SelectionResult> current;
    std::mutex busy;
    std::chrono::steady_clock::time_point last_used;
};

std::string sha256_hex(const std::string& data)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorKind::Numeric, "sha256 failed");
    std::string hex;
    hex.reserve(2 * len);
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

namespace {

HttpReply json_reply(int status, const json& doc)
{
    HttpReply r;
    r.status = status;
    r.body = dump_json(doc);
    return r;
}

HttpReply error_reply(int status, const std::string& message)
{
    return json_reply(status, json{{"error", message}});
}

int status_for(const Error& e)
{
    switch (e.kind()) {
    case ErrorKind::EmptyRegion: return 409;
    case ErrorKind::Degenerate:
    case ErrorKind::Numeric: return 422;
    default: return 400;
    }
}

json parse_body(const std::string& body)
{
    try {
        return json::parse(body);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("request body is not valid JSON: ") + e.what());
    }
}

}  // namespace

SelectionService::SelectionService(ServiceOptions options) : options_(std::move(options)) {}

SelectionService::~SelectionService() = default;

void SelectionService::expire_idle()
{
    const auto now = std::chrono::steady_clock::now();
    for (auto it = sessions_.begin(); it != sessions_.end();) {
        if (now - it->second->last_used > options_.idle_timeout)
            it = sessions_.erase(it);
        else
            ++it;
    }
}

std::shared_ptr<SelectionService::Session> SelectionService::find(const std::string& id)
{
    std::lock_guard lock(mutex_);
    expire_idle();
    const auto it = sessions_.find(id);
    if (it == sessions_.end())
        return nullptr;
    it->second->last_used = std::chrono::steady_clock::now();
    return it->second;
}

std::size_t SelectionService::session_count()
{
    std::lock_guard lock(mutex_);
    expire_idle();
    return sessions_.size();
}

std::size_t SelectionService::cached_fields()
{
    std::lock_guard lock(mutex_);
    return field_cache_.size();
}

HttpReply SelectionService::create_session(const std::string& body)
{
    Scene scene;
    PointCloud cloud;
    int resolution = options_.grid_resolution;
    double padding = options_.padding;
    KdeParams kde = options_.kde;
    try {
        const json doc = parse_body(body);
        if (!doc.is_object() || !doc.contains("scene"))
            return error_reply(400, "request needs a \"scene\" object");
        scene = scene_from_json(doc["scene"]);
        if (!(signed_distance(scene.head.position, scene.surface) > 0.0))
            return error_reply(400, "head must be above the surface plane");
        if (doc.contains("cloud_csv") && doc["cloud_csv"].is_string())
            cloud = parse_cloud_csv(doc["cloud_csv"].get<std::string>());
        else if (doc.contains("cloud_path") && doc["cloud_path"].is_string())
            cloud = load_cloud(doc["cloud_path"].get<std::string>());
        else
            return error_reply(400, "request needs \"cloud_csv\" or \"cloud_path\"");
        resolution = doc.value("grid", resolution);
        padding = doc.value("padding", padding);
        if (doc.contains("kde") && doc["kde"].is_object()) {
            kde.alpha = doc["kde"].value("alpha", kde.alpha);
            kde.pilot_bandwidth = doc["kde"].value("h0", kde.pilot_bandwidth);
        }
        if (resolution < 2)
            return error_reply(400, "grid resolution must be at least 2");
    } catch (const Error& e) {
        return error_reply(e.kind() == ErrorKind::Io ? 400 : status_for(e), e.what());
    } catch (const json::exception& e) {
        return error_reply(400, e.what());
    }

    std::ostringstream key_src;
    key_src.precision(17);
    key_src << format_cloud_csv(cloud) << '|' << resolution << '|' << padding << '|' << kde.alpha << '|'
            << kde.pilot_bandwidth << '|' << kde.nn_factor;
    const std::string key = sha256_hex(key_src.str());

    std::shared_ptr<const DensityField> field;
    bool cache_hit = false;
    {
        std::lock_guard lock(mutex_);
        const auto it = field_cache_.find(key);
        if (it != field_cache_.end()) {
            field = it->second;
            cache_hit = true;
        }
    }
    if (!field) {
        try {
            const GridBox grid = compute_bounds(cloud, padding, {resolution, resolution, resolution});
            field = std::make_shared<const DensityField>(estimate_density_mbe(cloud, grid, kde));
        } catch (const Error& e) {
            return error_reply(e.kind() == ErrorKind::Parameter ? 422 : status_for(e), e.what());
        }
        std::lock_guard lock(mutex_);
        field_cache_.emplace(key, field);
    }

    auto session = std::make_shared<Session>();
    session->scene = scene;
    session->cloud = std::make_shared<const PointCloud>(std::move(cloud));
    session->field = field;
    session->last_used = std::chrono::steady_clock::now();
    {
        std::lock_guard lock(mutex_);
        expire_idle();
        session->id = sha256_hex(key + "#" + std::to_string(next_session_++)).substr(0, 16);
        sessions_[session->id] = session;
    }

    const GridBox& g = field->grid;
    return json_reply(200, json{{"id", session->id},
                                {"points", session->cloud->size()},
                                {"bounds", {{"min", {g.min.x, g.min.y, g.min.z}}, {"max", {g.max.x, g.max.y, g.max.z}}}},
                                {"grid", g.resolution},
                                {"field_ready", true},
                                {"cache_hit", cache_hit}});
}

HttpReply SelectionService::select(const std::string& session_id, const std::string& body)
{
    auto session = find(session_id);
    if (!session)
        return error_reply(404, "unknown session");
    std::unique_lock busy(session->busy, std::try_to_lock);
    if (!busy.owns_lock())
        return error_reply(429, "a selection is already running for this session");

    try {
        const json doc = parse_body(body);
        if (!doc.is_object() || !doc.contains("trace"))
            return error_reply(400, "request needs a \"trace\" object");
        const InputTrace trace = parse_trace(doc["trace"]);
        const Technique technique = parse_technique(doc.value("technique", std::string("brush-lasso")));
        const std::string mode = doc.value("mode", std::string("set"));
        if (mode != "set" && mode != "subtract")
            return error_reply(400, "mode must be \"set\" or \"subtract\"");
        SelectOptions opts;
        opts.radius = doc.value("radius", 0.0);

        SelectionResult fresh =
            run_selection(technique, trace, session->scene, *session->field, session->cloud->positions, opts);
        if (mode == "set") {
            session->current = std::move(fresh);
        } else {
            SelectionResult base;
            if (session->current) {
                base = *session->current;
            } else {
                base.technique = fresh.technique;
                base.region = NodeMask(session->field->grid);
                base.volume = NodeMask(session->field->grid);
            }
            session->current = subtract(*session->field, base, fresh);
        }
        json out = selection_to_json(*session->current);
        out["mode"] = mode;
        out["mesh_url"] = "/api/session/" + session_id + "/mesh";
        out["triangles"] = session->current->mesh.triangles.size();
        return json_reply(200, out);
    } catch (const Error& e) {
        return error_reply(status_for(e), e.what());
    } catch (const json::exception& e) {
        return error_reply(400, e.what());
    }
}

HttpReply SelectionService::mesh(const std::string& session_id)
{
    auto session = find(session_id);
    if (!session)
        return error_reply(404, "unknown session");
    std::lock_guard busy(session->busy);
    if (!session->current)
        return error_reply(404, "session has no selection yet");
    HttpReply r;
    r.body = mesh_to_obj(session->current->mesh);
    r.content_type = "model/obj";
    r.headers["ETag"] = "\"" + sha256_hex(r.body).substr(0, 32) + "\"";
    return r;
}

HttpReply SelectionService::camera(const std::string& session_id, const std::string& head_param)
{
    auto session = find(session_id);
    if (!session)
        return error_reply(404, "unknown session");
    HeadPose head = session->scene.head;
    if (!head_param.empty()) {
        Vec3 p;
        char tail = 0;
        if (std::sscanf(head_param.c_str(), "%lf,%lf,%lf%c", &p.x, &p.y, &p.z, &tail) != 3 || !is_finite(p))
            return error_reply(400, "head must be given as x,y,z");
        head.position = p;
    }
    try {
        Scene scene = session->scene;
        scene.head = head;
        if (!(signed_distance(head.position, scene.surface) > 0.0))
            return error_reply(422, "head must be above the surface plane");
        return json_reply(200, projection_to_json(scene_camera(scene, session->field->grid)));
    } catch (const Error& e) {
        return error_reply(e.kind() == ErrorKind::Geometry ? 422 : status_for(e), e.what());
    }
}

void SelectionService::mount(httplib::Server& server)
{
    const auto send = [](httplib::Response& res, const HttpReply& reply) {
        res.status = reply.status;
        for (const auto& [k, v] : reply.headers)
            res.set_header(k, v);
        res.set_content(reply.body, reply.content_type);
    };
    server.set_default_headers({{"Access-Control-Allow-Origin", options_.cors_origin},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server.Post("/api/session", [this, send](const httplib::Request& req, httplib::Response& res) {
        send(res, create_session(req.body));
    });
    server.Post(R"(/api/session/([^/]+)/select)", [this, send](const httplib::Request& req, httplib::Response& res) {
        send(res, select(req.matches[1], req.body));
    });
    server.Get(R"(/api/session/([^/]+)/mesh)", [this, send](const httplib::Request& req, httplib::Response& res) {
        const HttpReply reply = mesh(req.matches[1]);
        const auto etag = reply.headers.find("ETag");
        if (etag != reply.headers.end() && req.get_header_value("If-None-Match") == etag->second) {
            res.status = 304;
            res.set_header("ETag", etag->second);
            return;
        }
        send(res, reply);
    });
    server.Get(R"(/api/session/([^/]+)/camera)", [this, send](const httplib::Request& req, httplib::Response& res) {
        send(res, camera(req.matches[1], req.get_param_value("head")));
    });
}

}  // namespace xrsel
