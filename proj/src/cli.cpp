#include "xrsel/cli.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "binary_io.hpp"
#include "xrsel/error.hpp"
#include "xrsel/field.hpp"
#include "xrsel/kde.hpp"
#include "xrsel/pipeline.hpp"
#include "xrsel/service.hpp"
#include "xrsel/synth.hpp"

namespace xrsel::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct RunConfig {
    // gen
    std::string kind;
    std::size_t n = 5000;
    std::size_t k = 2;
    double scale = 0.05;
    double separation = 0.3;
    double shell_radius = 0.3;
    double thickness = 0.0;
    std::size_t noise = 0;
    std::size_t segments = 3;
    double tilt = 21.0;
    double head_height = 0.6;
    std::string labels_out;
    std::string spines_out;
    std::string meta_out;
    std::string scene_out;
    // shared
    std::uint64_t seed = 1;
    std::string cloud;
    std::string field;
    std::string trace;
    std::string scene;
    std::string labels;
    std::string spines;
    std::string selection;
    std::string out;
    std::string mesh;
    // trace
    int target = 0;
    // estimate
    int grid = kDefaultResolution;
    double padding = 0.05;
    double alpha = 0.5;
    double h0 = 0.0;
    // select
    std::string technique = "brush-lasso";
    double radius = 0.0;
    double step = 0.0;
    // eval
    int label = 0;
    // serve
    std::string host = "127.0.0.1";
    int port = 8080;
    int serve_grid = 64;
    int idle_timeout = 600;
    std::string cors_origin = "*";
};

int exit_code_for(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::EmptyRegion: return kExitEmptyRegion;
    case ErrorKind::Numeric: return kExitNumeric;
    default: return kExitUsage;
    }
}

std::string sibling(const std::string& base, const std::string& suffix)
{
    const fs::path p(base);
    return (p.parent_path() / (p.stem().string() + suffix)).string();
}

json read_json_file(const std::string& path)
{
    try {
        return json::parse(detail::read_file_text(path));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, path + ": " + e.what());
    }
}

Scene load_scene(const RunConfig& cfg, const std::optional<json>& inline_scene)
{
    if (!cfg.scene.empty())
        return scene_from_json(read_json_file(cfg.scene));
    if (inline_scene)
        return scene_from_json(*inline_scene);
    throw Error(ErrorKind::Validation, "a scene is required (--scene or \"scene\" in --config)");
}

// Surface placed over the generated data: cutting through its middle for
// filaments (so spines cross it), just above it otherwise.
Scene scene_for(const LabeledCloud& labeled, const RunConfig& cfg)
{
    Vec3 lo = labeled.cloud.positions.front();
    Vec3 hi = lo;
    for (const auto& p : labeled.cloud.positions) {
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], p[a]);
            hi[a] = std::max(hi[a], p[a]);
        }
    }
    Scene scene;
    scene.surface = tilted_surface(cfg.tilt);
    Vec3 center = (lo + hi) * 0.5;
    if (cfg.kind != "filaments") {
        const double rise = std::tan(cfg.tilt * M_PI / 180.0) * 0.5 * (hi.y - lo.y);
        center.z = hi.z + rise + 0.02;
    }
    scene.surface.center = center;
    scene.head.position = center + scene.surface.axis_z * cfg.head_height;
    return scene;
}

json spines_to_json(const LabeledCloud& labeled)
{
    json spines = json::array();
    for (const auto& s : labeled.spines) {
        json pts = json::array();
        for (const auto& p : s.points)
            pts.push_back({p.x, p.y, p.z});
        spines.push_back({{"label", s.label}, {"points", pts}});
    }
    return json{{"spines", spines}};
}

std::vector<Spine> spines_from_json(const json& doc)
{
    std::vector<Spine> out;
    if (!doc.contains("spines") || !doc["spines"].is_array())
        throw Error(ErrorKind::Parse, "spine file needs a \"spines\" array");
    for (const auto& s : doc["spines"]) {
        Spine spine;
        spine.label = s.at("label").get<int>();
        for (const auto& p : s.at("points"))
            spine.points.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()});
        out.push_back(std::move(spine));
    }
    return out;
}

int cmd_gen(const RunConfig& cfg, std::ostream& out)
{
    LabeledCloud labeled;
    json params;
    if (cfg.kind == "shell") {
        const double thickness = cfg.thickness > 0.0 ? cfg.thickness : 0.02;
        labeled = gen_shell(cfg.n, cfg.shell_radius, thickness, cfg.noise, cfg.seed);
        params = {{"n", cfg.n}, {"radius", cfg.shell_radius}, {"thickness", thickness}, {"noise", cfg.noise}};
    } else if (cfg.kind == "clusters") {
        labeled = gen_clusters(cfg.k, cfg.n, cfg.scale, cfg.separation, cfg.seed);
        params = {{"k", cfg.k}, {"n", cfg.n}, {"scale", cfg.scale}, {"separation", cfg.separation}};
    } else {
        const double thickness = cfg.thickness > 0.0 ? cfg.thickness : 0.01;
        labeled = gen_filaments(cfg.segments, cfg.n, thickness, cfg.seed);
        params = {{"segments", cfg.segments}, {"n", cfg.n}, {"thickness", thickness}};
    }

    const std::string labels_path = cfg.labels_out.empty() ? sibling(cfg.out, "_labels.csv") : cfg.labels_out;
    const std::string meta_path = cfg.meta_out.empty() ? sibling(cfg.out, "_meta.json") : cfg.meta_out;
    const std::string scene_path = cfg.scene_out.empty() ? sibling(cfg.out, "_scene.json") : cfg.scene_out;

    save_cloud_csv(labeled.cloud, cfg.out);
    detail::write_file_text(labels_path, format_labels_csv(labeled.labels));
    json centers = json::array();
    for (const auto& c : labeled.centers)
        centers.push_back({c.x, c.y, c.z});
    detail::write_file_text(meta_path, dump_json({{"kind", cfg.kind},
                                                  {"description", labeled.description},
                                                  {"seed", cfg.seed},
                                                  {"rng", kRngAlgorithm},
                                                  {"params", params},
                                                  {"points", labeled.cloud.size()},
                                                  {"centers", centers}}));
    detail::write_file_text(scene_path, dump_json(scene_to_json(scene_for(labeled, cfg))));

    out << "kind " << cfg.kind << "\npoints " << labeled.cloud.size() << '\n';
    std::map<int, std::size_t> per_label;
    for (int l : labeled.labels)
        ++per_label[l];
    for (const auto& [l, count] : per_label)
        out << "label " << l << ' ' << count << '\n';
    out << "cloud " << cfg.out << "\nlabels " << labels_path << "\nmeta " << meta_path << "\nscene " << scene_path
        << '\n';
    if (!labeled.spines.empty()) {
        const std::string spines_path = cfg.spines_out.empty() ? sibling(cfg.out, "_spines.json") : cfg.spines_out;
        detail::write_file_text(spines_path, dump_json(spines_to_json(labeled)));
        out << "spines " << spines_path << '\n';
    }
    return kExitOk;
}

int cmd_trace(const RunConfig& cfg, const std::optional<json>& inline_scene, std::ostream& out)
{
    const Scene scene = load_scene(cfg, inline_scene);
    LabeledCloud labeled;
    labeled.cloud = load_cloud(cfg.cloud);
    labeled.labels = parse_labels_csv(detail::read_file_text(cfg.labels));
    if (labeled.labels.size() != labeled.cloud.size())
        throw Error(ErrorKind::Validation, "labels and cloud differ in length");
    if (!cfg.spines.empty())
        labeled.spines = spines_from_json(read_json_file(cfg.spines));
    const InputTrace trace =
        gen_scripted_trace(parse_trace_kind(cfg.kind), labeled, cfg.target, scene.surface, scene.head, cfg.seed);
    detail::write_file_text(cfg.out, dump_json(trace_to_json(trace)));
    out << "samples " << trace.samples.size() << "\ntrace " << cfg.out << '\n';
    return kExitOk;
}

int cmd_estimate(const RunConfig& cfg, std::ostream& out)
{
    const PointCloud cloud = load_cloud(cfg.cloud);
    const GridBox grid = compute_bounds(cloud, cfg.padding, {cfg.grid, cfg.grid, cfg.grid});
    KdeParams kde;
    kde.alpha = cfg.alpha;
    kde.pilot_bandwidth = cfg.h0;
    BandwidthSet bw;
    const DensityField field = estimate_density_mbe(cloud, grid, kde, &bw);
    if (!std::all_of(field.values.begin(), field.values.end(), [](float v) { return std::isfinite(v); }))
        throw Error(ErrorKind::Numeric, "density field contains non-finite values");
    save_field(field, cfg.out);
    const FieldStats stats = field_stats(field);
    out.precision(9);
    out << "points " << cloud.size() << "\ngrid " << cfg.grid << "\nh0 " << bw.pilot_bandwidth << "\nmass "
        << stats.mass << "\nmin " << stats.min << "\nmax " << stats.max << "\nfield " << cfg.out << '\n';
    return kExitOk;
}

int cmd_select(const RunConfig& cfg, const std::optional<json>& inline_scene, std::ostream& out)
{
    const Scene scene = load_scene(cfg, inline_scene);
    const DensityField field = load_field(cfg.field);
    const InputTrace trace = parse_trace_text(detail::read_file_text(cfg.trace));
    PointCloud cloud;
    if (!cfg.cloud.empty())
        cloud = load_cloud(cfg.cloud);
    SelectOptions opts;
    opts.radius = cfg.radius;
    opts.ray_step = cfg.step;
    const SelectionResult result =
        run_selection(parse_technique(cfg.technique), trace, scene, field, cloud.positions, opts);
    detail::write_file_text(cfg.out, dump_json(selection_to_json(result)));
    if (!cfg.mesh.empty())
        detail::write_file_text(cfg.mesh, mesh_to_obj(result.mesh));
    out.precision(9);
    out << "technique " << result.technique << "\nrho0 " << result.rho0 << "\nN_VCR "
        << result.diagnostics.region_nodes << "\nnodes " << result.diagnostics.volume_nodes << "\npoints "
        << result.points.size() << "\ntriangles " << result.mesh.triangles.size() << "\nselection " << cfg.out
        << '\n';
    return kExitOk;
}

int cmd_eval(const RunConfig& cfg, std::ostream& out)
{
    const json sel = read_json_file(cfg.selection);
    if (!sel.contains("selected_points") || !sel["selected_points"].is_array())
        throw Error(ErrorKind::Parse, "selection file has no \"selected_points\" array");
    std::vector<std::uint32_t> selected;
    try {
        selected = sel["selected_points"].get<std::vector<std::uint32_t>>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("selected_points: ") + e.what());
    }
    const std::vector<int> labels = parse_labels_csv(detail::read_file_text(cfg.labels));
    const Metrics m = score_labels(selected, cfg.label, labels);
    const json doc = {{"label", cfg.label}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
                      {"jaccard", m.jaccard}, {"tp", m.tp},           {"fp", m.fp},         {"fn", m.fn}};
    detail::write_file_text(cfg.out, dump_json(doc));
    out << dump_json(doc);
    return kExitOk;
}

int cmd_serve(const RunConfig& cfg, std::ostream& out, std::ostream& err)
{
    ServiceOptions opts;
    opts.grid_resolution = cfg.serve_grid;
    opts.padding = cfg.padding;
    opts.kde.alpha = cfg.alpha;
    opts.kde.pilot_bandwidth = cfg.h0;
    opts.idle_timeout = std::chrono::seconds(cfg.idle_timeout);
    opts.cors_origin = cfg.cors_origin;
    SelectionService service(opts);
    httplib::Server server;
    // Without SO_REUSEPORT a second server on a busy port fails to bind.
    server.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
    });
    service.mount(server);
    if (!server.bind_to_port(cfg.host, cfg.port)) {
        err << "error: cannot bind " << cfg.host << ':' << cfg.port << '\n';
        return kExitEnvironment;
    }
    out << "listening on " << cfg.host << ':' << cfg.port << std::endl;
    if (!server.listen_after_bind())
        return kExitEnvironment;
    return kExitOk;
}

std::string json_to_arg(const json& v)
{
    if (v.is_string())
        return v.get<std::string>();
    if (v.is_array()) {
        std::string s;
        for (const auto& e : v)
            s += (s.empty() ? "" : ",") + json_to_arg(e);
        return s;
    }
    return v.dump();
}

}  // namespace

int run(const std::vector<std::string>& input, std::ostream& out, std::ostream& err)
{
    RunConfig cfg;
    CLI::App app{"Density-aware point-cloud selection", "xrsel"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    const std::vector<std::string> techniques{"brush", "brush-wyp", "brush-lasso", "cloud-lasso"};

    auto* gen = app.add_subcommand("gen", "Generate a labelled synthetic cloud");
    gen->add_option("--kind", cfg.kind, "shell | clusters | filaments")
        ->required()
        ->check(CLI::IsMember({"shell", "clusters", "filaments"}));
    gen->add_option("--n", cfg.n, "Points per structure")->capture_default_str();
    gen->add_option("--k", cfg.k, "Cluster count")->capture_default_str();
    gen->add_option("--scale", cfg.scale, "Plummer scale radius")->capture_default_str();
    gen->add_option("--separation", cfg.separation, "Minimum cluster center distance")->capture_default_str();
    gen->add_option("--shell-radius", cfg.shell_radius)->capture_default_str();
    gen->add_option("--thickness", cfg.thickness, "Shell or filament thickness (0 = kind default)");
    gen->add_option("--noise", cfg.noise, "Shell interferer count")->capture_default_str();
    gen->add_option("--segments", cfg.segments, "Filament count")->capture_default_str();
    gen->add_option("--seed", cfg.seed)->capture_default_str();
    gen->add_option("--tilt", cfg.tilt, "Surface tilt in degrees for the emitted scene")->capture_default_str();
    gen->add_option("--head-height", cfg.head_height)->capture_default_str();
    gen->add_option("--out", cfg.out, "Cloud CSV path")->default_str("cloud.csv");
    gen->add_option("--labels", cfg.labels_out);
    gen->add_option("--spines", cfg.spines_out);
    gen->add_option("--meta", cfg.meta_out);
    gen->add_option("--scene-out", cfg.scene_out);

    auto* trace = app.add_subcommand("trace", "Script an input trace around a labelled structure");
    trace->add_option("--kind", cfg.kind)
        ->required()
        ->check(CLI::IsMember({"lasso_around_cluster", "brush_along_filament", "mixed_cross_space"}));
    trace->add_option("--cloud", cfg.cloud)->required()->check(CLI::ExistingFile);
    trace->add_option("--labels", cfg.labels)->required()->check(CLI::ExistingFile);
    trace->add_option("--spines", cfg.spines)->check(CLI::ExistingFile);
    trace->add_option("--scene", cfg.scene)->check(CLI::ExistingFile);
    trace->add_option("--target", cfg.target)->capture_default_str();
    trace->add_option("--seed", cfg.seed)->capture_default_str();
    trace->add_option("--out", cfg.out)->default_str("trace.json");

    auto* estimate = app.add_subcommand("estimate", "Estimate the density field of a cloud");
    estimate->add_option("--cloud", cfg.cloud)->required()->check(CLI::ExistingFile);
    estimate->add_option("--grid", cfg.grid)->capture_default_str()->check(CLI::Range(2, 1024));
    estimate->add_option("--padding", cfg.padding)->capture_default_str()->check(CLI::NonNegativeNumber);
    estimate->add_option("--alpha", cfg.alpha)->capture_default_str();
    estimate->add_option("--h0", cfg.h0, "Pilot bandwidth (0 = automatic)")->capture_default_str();
    estimate->add_option("--out", cfg.out)->default_str("field.xrdf");

    auto* select = app.add_subcommand("select", "Run a selection technique on a field");
    select->add_option("--field", cfg.field)->required()->check(CLI::ExistingFile);
    select->add_option("--trace", cfg.trace)->required()->check(CLI::ExistingFile);
    select->add_option("--scene", cfg.scene)->check(CLI::ExistingFile);
    select->add_option("--cloud", cfg.cloud)->check(CLI::ExistingFile);
    select->add_option("--technique", cfg.technique)->capture_default_str()->check(CLI::IsMember(techniques));
    select->add_option("--radius", cfg.radius, "Brush radius (0 = default)");
    select->add_option("--step", cfg.step, "Ray step (0 = default)");
    select->add_option("--out", cfg.out)->default_str("selection.json");
    select->add_option("--mesh", cfg.mesh, "OBJ output path");

    auto* eval = app.add_subcommand("eval", "Score a selection against labels");
    eval->add_option("--selection", cfg.selection)->required()->check(CLI::ExistingFile);
    eval->add_option("--labels", cfg.labels)->required()->check(CLI::ExistingFile);
    eval->add_option("--label", cfg.label)->required();
    eval->add_option("--out", cfg.out)->default_str("metrics.json");

    auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
    serve->add_option("--host", cfg.host)->capture_default_str();
    serve->add_option("--port", cfg.port)->capture_default_str()->check(CLI::Range(0, 65535));
    serve->add_option("--grid", cfg.serve_grid)->capture_default_str()->check(CLI::Range(2, 1024));
    serve->add_option("--padding", cfg.padding)->capture_default_str();
    serve->add_option("--alpha", cfg.alpha)->capture_default_str();
    serve->add_option("--h0", cfg.h0)->capture_default_str();
    serve->add_option("--idle-timeout", cfg.idle_timeout, "Session idle timeout in seconds")->capture_default_str();
    serve->add_option("--cors-origin", cfg.cors_origin)->capture_default_str();

    // --config is expanded into flags placed right after the subcommand, so
    // explicit flags (parsed later, last one wins) override it.
    std::vector<std::string> args;
    std::optional<std::string> config_path;
    for (std::size_t i = 0; i < input.size(); ++i) {
        if (input[i] == "--config" && i + 1 < input.size()) {
            config_path = input[++i];
        } else if (input[i].rfind("--config=", 0) == 0) {
            config_path = input[i].substr(9);
        } else {
            args.push_back(input[i]);
        }
    }
    std::optional<json> inline_scene;
    try {
        if (config_path) {
            const json config = read_json_file(*config_path);
            if (!config.is_object())
                throw Error(ErrorKind::Parse, "config must be a JSON object");
            const auto sub_it =
                std::find_if(args.begin(), args.end(), [](const std::string& a) { return a.rfind("-", 0) != 0; });
            CLI::App* sub = sub_it == args.end() ? nullptr : app.get_subcommand_no_throw(*sub_it);
            if (sub) {
                std::vector<std::string> injected;
                for (const auto& [key, value] : config.items()) {
                    if (key == "scene" && value.is_object()) {
                        inline_scene = value;
                        continue;
                    }
                    std::string flag = "--" + key;
                    std::replace(flag.begin() + 2, flag.end(), '_', '-');
                    if (sub->get_option_no_throw(flag) == nullptr)
                        continue;
                    injected.push_back(flag);
                    injected.push_back(json_to_arg(value));
                }
                args.insert(sub_it + 1, injected.begin(), injected.end());
            }
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    const auto default_out = [&](const char* path) {
        if (cfg.out.empty())
            cfg.out = path;
    };
    try {
        if (*gen) {
            default_out("cloud.csv");
            return cmd_gen(cfg, out);
        }
        if (*trace) {
            default_out("trace.json");
            return cmd_trace(cfg, inline_scene, out);
        }
        if (*estimate) {
            default_out("field.xrdf");
            return cmd_estimate(cfg, out);
        }
        if (*select) {
            default_out("selection.json");
            return cmd_select(cfg, inline_scene, out);
        }
        if (*eval) {
            default_out("metrics.json");
            return cmd_eval(cfg, out);
        }
        if (*serve)
            return cmd_serve(cfg, out, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::bad_alloc&) {
        err << "error: out of memory\n";
        return kExitEnvironment;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}

int run(const std::vector<std::string>& args)
{
    return run(args, std::cout, std::cerr);
}

}  // namespace xrsel::cli
