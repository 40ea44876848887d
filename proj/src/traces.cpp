#include "xrsel/traces.hpp"

#include <cmath>

#include "xrsel/error.hpp"

namespace xrsel {

using nlohmann::json;

const char* to_string(InputSource source)
{
    switch (source) {
    case InputSource::Pen: return "pen";
    case InputSource::Touch: return "touch";
    case InputSource::Hand: return "hand";
    }
    return "pen";
}

const char* to_string(Space space) { return space == Space::Surface ? "surface" : "air"; }

namespace {

Vec3 parse_point(const json& j, std::size_t index)
{
    if (!j.is_array() || j.size() != 3)
        throw Error(ErrorKind::Parse, "sample " + std::to_string(index) + ": \"p\" must be [x,y,z]");
    Vec3 p;
    for (std::size_t a = 0; a < 3; ++a) {
        if (!j[a].is_number())
            throw Error(ErrorKind::Parse, "sample " + std::to_string(index) + ": non-numeric coordinate");
        p[a] = j[a].get<double>();
    }
    if (!is_finite(p))
        throw Error(ErrorKind::Parse, "sample " + std::to_string(index) + ": non-finite coordinate");
    return p;
}

}  // namespace

InputTrace parse_trace(const json& doc)
{
    if (!doc.is_object() || !doc.contains("samples") || !doc["samples"].is_array())
        throw Error(ErrorKind::Parse, "trace document needs a \"samples\" array");
    InputTrace trace;
    const auto& samples = doc["samples"];
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (!s.is_object() || !s.contains("p") || !s.contains("t"))
            throw Error(ErrorKind::Parse, "sample " + std::to_string(i) + ": missing \"p\" or \"t\"");
        InputSample sample;
        sample.position = parse_point(s["p"], i);
        if (!s["t"].is_number())
            throw Error(ErrorKind::Parse, "sample " + std::to_string(i) + ": \"t\" must be a number");
        sample.timestamp = s["t"].get<double>();
        if (s.contains("source") && !s["source"].is_null()) {
            const auto src = s["source"].get<std::string>();
            if (src == "pen")
                sample.source = InputSource::Pen;
            else if (src == "touch")
                sample.source = InputSource::Touch;
            else if (src == "hand")
                sample.source = InputSource::Hand;
            else
                throw Error(ErrorKind::Parse, "sample " + std::to_string(i) + ": unknown source '" + src + "'");
        }
        if (s.contains("space") && !s["space"].is_null()) {
            const auto sp = s["space"].get<std::string>();
            if (sp == "surface")
                sample.declared_space = Space::Surface;
            else if (sp == "air")
                sample.declared_space = Space::Air;
            else
                throw Error(ErrorKind::Parse, "sample " + std::to_string(i) + ": unknown space '" + sp + "'");
        }
        if (!trace.samples.empty() && sample.timestamp < trace.samples.back().timestamp)
            throw Error(ErrorKind::Parse, "sample " + std::to_string(i) + ": timestamps must be non-decreasing");
        trace.samples.push_back(sample);
    }
    if (trace.samples.empty())
        throw Error(ErrorKind::Parse, "trace has no samples");
    if (doc.contains("meta") && doc["meta"].is_object())
        trace.meta = doc["meta"];
    return trace;
}

InputTrace parse_trace_text(const std::string& text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("trace is not valid JSON: ") + e.what());
    }
    try {
        return parse_trace(doc);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("trace schema error: ") + e.what());
    }
}

json trace_to_json(const InputTrace& trace)
{
    json samples = json::array();
    for (const auto& s : trace.samples) {
        json js;
        js["p"] = {s.position.x, s.position.y, s.position.z};
        js["t"] = s.timestamp;
        js["source"] = to_string(s.source);
        js["space"] = s.declared_space ? json(to_string(*s.declared_space)) : json(nullptr);
        samples.push_back(std::move(js));
    }
    return json{{"samples", std::move(samples)}, {"meta", trace.meta}};
}

SegmentedTrace segment_trace(const InputTrace& trace, const SurfaceGeometry& surface, double eps)
{
    validate_surface(surface);
    if (!(eps >= 0.0))
        throw Error(ErrorKind::Parameter, "contact tolerance must be non-negative");
    SegmentedTrace out;
    for (std::size_t i = 0; i < trace.samples.size(); ++i) {
        const auto& s = trace.samples[i];
        const double d = signed_distance(s.position, surface);
        Space space;
        if (s.declared_space)
            space = *s.declared_space;
        else if (d < -eps)
            throw Error(ErrorKind::Geometry, "sample " + std::to_string(i) + " lies below the surface");
        else
            space = std::abs(d) <= eps ? Space::Surface : Space::Air;

        if (space == Space::Surface) {
            // Points already on the plane up to rounding stay put, so that
            // segmenting a segmented trace is exact.
            const double noise = 1e-12 * (1.0 + norm(s.position) + norm(surface.center));
            const Vec3 snapped = std::abs(d) <= noise ? s.position : project_onto_plane(s.position, surface);
            if (!point_in_surface_rect(snapped, surface, eps))
                throw Error(ErrorKind::Geometry,
                            "sample " + std::to_string(i) + " touches the plane outside the surface");
            out.surface_samples.push_back(snapped);
        } else {
            if (!(d > 0.0))
                throw Error(ErrorKind::Geometry, "air sample " + std::to_string(i) + " is not above the surface");
            out.air_samples.push_back(s.position);
        }

        auto& list_size = space == Space::Surface ? out.surface_samples : out.air_samples;
        if (out.segments.empty() || out.segments.back().space != space)
            out.segments.push_back({space, list_size.size() - 1, 0});
        ++out.segments.back().count;
    }
    return out;
}

double polyline_length(const std::vector<Vec3>& points)
{
    double total = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i)
        total += norm(points[i] - points[i - 1]);
    return total;
}

std::vector<Vec3> resample_polyline(const std::vector<Vec3>& points, double spacing)
{
    if (points.size() < 2)
        return points;
    if (!(spacing > 0.0))
        throw Error(ErrorKind::Parameter, "resample spacing must be positive");
    std::vector<Vec3> out{points.front()};
    for (std::size_t i = 1; i < points.size(); ++i) {
        const Vec3 a = points[i - 1];
        const Vec3 b = points[i];
        const double len = norm(b - a);
        if (len == 0.0)
            continue;
        const auto pieces = static_cast<std::size_t>(std::max(1.0, std::ceil(len / spacing - 1e-12)));
        for (std::size_t k = 1; k < pieces; ++k) {
            const double t = static_cast<double>(k) / static_cast<double>(pieces);
            out.push_back(a + (b - a) * t);
        }
        out.push_back(b);
    }
    return out;
}

}  // namespace xrsel
