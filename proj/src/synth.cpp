#include "xrsel/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "xrsel/error.hpp"

namespace xrsel {

double Rng::normal()
{
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0)
        u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
}

Vec3 Rng::unit_vector()
{
    const double z = uniform(-1.0, 1.0);
    const double phi = uniform(0.0, 2.0 * std::numbers::pi);
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    return {s * std::cos(phi), s * std::sin(phi), z};
}

LabeledCloud gen_shell(std::size_t n, double radius, double thickness, std::size_t noise_n, std::uint64_t seed,
                       Vec3 center)
{
    if (n == 0)
        throw Error(ErrorKind::Parameter, "shell needs at least one point");
    if (!(radius > 0.0) || !(thickness >= 0.0) || thickness >= 2.0 * radius)
        throw Error(ErrorKind::Parameter, "shell radius/thickness out of range");
    Rng rng(seed);
    LabeledCloud out;
    out.description = "half-spherical shell";
    const double r_in = radius - 0.5 * thickness;
    for (std::size_t i = 0; i < n; ++i) {
        Vec3 d = rng.unit_vector();
        d.z = std::abs(d.z);
        const double r = r_in + thickness * rng.uniform();
        out.cloud.positions.push_back(center + d * r);
        out.labels.push_back(1);
    }
    for (std::size_t i = 0; i < noise_n; ++i) {
        Vec3 p;
        do {
            p = {rng.uniform(-r_in, r_in), rng.uniform(-r_in, r_in), rng.uniform(0.0, r_in)};
        } while (norm(p) > r_in);
        out.cloud.positions.push_back(center + p);
        out.labels.push_back(0);
    }
    out.centers.push_back(center);
    return out;
}

LabeledCloud gen_clusters(std::size_t k, std::size_t per_cluster, double scale, double separation,
                          std::uint64_t seed, Vec3 origin)
{
    if (k == 0)
        throw Error(ErrorKind::Parameter, "need at least one cluster");
    if (!(scale > 0.0) || !(separation >= 0.0))
        throw Error(ErrorKind::Parameter, "cluster scale must be positive and separation non-negative");
    Rng rng(seed);
    LabeledCloud out;
    out.description = "Plummer clusters";
    out.centers.push_back(origin);
    constexpr int kMaxTries = 10000;
    while (out.centers.size() < k) {
        bool placed = false;
        for (int attempt = 0; attempt < kMaxTries && !placed; ++attempt) {
            const Vec3 anchor = out.centers[static_cast<std::size_t>(rng.uniform() * out.centers.size()) %
                                            out.centers.size()];
            const Vec3 candidate = anchor + rng.unit_vector() * (separation * rng.uniform(1.0, 1.5));
            placed = std::all_of(out.centers.begin(), out.centers.end(),
                                 [&](const Vec3& c) { return norm(c - candidate) >= separation; });
            if (placed)
                out.centers.push_back(candidate);
        }
        if (!placed)
            throw Error(ErrorKind::Parameter, "could not pack cluster centers at the requested separation");
    }
    // Plummer cumulative mass M(<r) = r^3 / (r^2 + a^2)^{3/2}, truncated at 10 a.
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < per_cluster;) {
            const double u = rng.uniform();
            if (u <= 0.0)
                continue;
            const double r = scale / std::sqrt(std::pow(u, -2.0 / 3.0) - 1.0);
            if (!(r < 10.0 * scale))
                continue;
            out.cloud.positions.push_back(out.centers[c] + rng.unit_vector() * r);
            out.labels.push_back(static_cast<int>(c));
            ++i;
        }
    }
    return out;
}

namespace {

Vec3 any_perpendicular(const Vec3& t)
{
    const Vec3 helper = std::abs(t.x) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
    return normalize(cross(t, helper));
}

}  // namespace

LabeledCloud gen_filaments(std::size_t segments, std::size_t points_per_segment, double thickness,
                           std::uint64_t seed)
{
    if (segments == 0)
        throw Error(ErrorKind::Parameter, "need at least one filament");
    if (!(thickness >= 0.0))
        throw Error(ErrorKind::Parameter, "thickness must be non-negative");
    Rng rng(seed);
    LabeledCloud out;
    out.description = "filaments";
    for (std::size_t s = 0; s < segments; ++s) {
        Spine spine;
        spine.label = static_cast<int>(s);
        Vec3 p{rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8)};
        Vec3 heading = rng.unit_vector();
        spine.points.push_back(p);
        for (int v = 0; v < 3; ++v) {
            // Gently bending walk that stays inside the unit cube.
            heading = normalize(heading + rng.unit_vector() * 0.5);
            Vec3 q = p + heading * rng.uniform(0.15, 0.25);
            for (std::size_t a = 0; a < 3; ++a) {
                if (q[a] < 0.05 || q[a] > 0.95) {
                    heading[a] = -heading[a];
                    q[a] = std::clamp(p[a] + heading[a] * std::abs(q[a] - p[a]), 0.05, 0.95);
                }
            }
            spine.points.push_back(q);
            p = q;
        }
        std::vector<double> cumulative{0.0};
        for (std::size_t v = 1; v < spine.points.size(); ++v)
            cumulative.push_back(cumulative.back() + norm(spine.points[v] - spine.points[v - 1]));
        const double total = cumulative.back();
        for (std::size_t i = 0; i < points_per_segment; ++i) {
            const double at = rng.uniform() * total;
            std::size_t seg = 1;
            while (seg + 1 < cumulative.size() && cumulative[seg] < at)
                ++seg;
            const Vec3 a = spine.points[seg - 1];
            const Vec3 b = spine.points[seg];
            const double len = cumulative[seg] - cumulative[seg - 1];
            const double t = len > 0.0 ? std::clamp((at - cumulative[seg - 1]) / len, 0.0, 1.0) : 0.0;
            const Vec3 tangent = normalize(b - a);
            const Vec3 e1 = any_perpendicular(tangent);
            const Vec3 e2 = cross(tangent, e1);
            const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const double r = std::abs(rng.normal()) * thickness;
            out.cloud.positions.push_back(a + (b - a) * t + (e1 * std::cos(phi) + e2 * std::sin(phi)) * r);
            out.labels.push_back(spine.label);
        }
        out.spines.push_back(std::move(spine));
    }
    return out;
}

Metrics score_labels(const std::vector<std::uint32_t>& selected, int truth_label, const std::vector<int>& labels)
{
    const auto truth_count = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), truth_label));
    if (truth_count == 0)
        throw Error(ErrorKind::Parameter, "label " + std::to_string(truth_label) + " does not occur in the cloud");
    std::vector<std::uint32_t> sel = selected;
    std::sort(sel.begin(), sel.end());
    sel.erase(std::unique(sel.begin(), sel.end()), sel.end());
    Metrics m;
    for (auto idx : sel) {
        if (idx >= labels.size())
            throw Error(ErrorKind::Parameter, "selected index " + std::to_string(idx) + " is out of range");
        if (labels[idx] == truth_label)
            ++m.tp;
        else
            ++m.fp;
    }
    m.fn = truth_count - m.tp;
    m.precision = sel.empty() ? 0.0 : static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
    m.recall = static_cast<double>(m.tp) / static_cast<double>(truth_count);
    m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    m.jaccard = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp + m.fn);
    return m;
}

Metrics score(const std::vector<std::uint32_t>& selected, int truth_label, const LabeledCloud& labeled)
{
    return score_labels(selected, truth_label, labeled.labels);
}

TraceKind parse_trace_kind(const std::string& name)
{
    if (name == "lasso_around_cluster")
        return TraceKind::LassoAroundCluster;
    if (name == "brush_along_filament")
        return TraceKind::BrushAlongFilament;
    if (name == "mixed_cross_space")
        return TraceKind::MixedCrossSpace;
    throw Error(ErrorKind::Parameter, "unknown trace kind '" + name + "'");
}

const char* to_string(TraceKind kind)
{
    switch (kind) {
    case TraceKind::LassoAroundCluster: return "lasso_around_cluster";
    case TraceKind::BrushAlongFilament: return "brush_along_filament";
    case TraceKind::MixedCrossSpace: return "mixed_cross_space";
    }
    return "";
}

Vec3 central_projection(const Vec3& point, const HeadPose& head, const SurfaceGeometry& surface)
{
    const double dh = signed_distance(head.position, surface);
    const double dp = signed_distance(point, surface);
    if (dh == dp)
        throw Error(ErrorKind::Degenerate, "point is level with the head; no central projection");
    const double s = dh / (dh - dp);
    return head.position + (point - head.position) * s;
}

std::vector<Vec2> convex_hull(std::vector<Vec2> pts)
{
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3)
        return pts;
    std::vector<Vec2> hull(2 * pts.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        while (k >= 2 && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0.0)
            --k;
        hull[k++] = pts[i];
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
        while (k >= t && cross(hull[k - 1] - hull[k - 2], pts[i - 1] - hull[k - 2]) <= 0.0)
            --k;
        hull[k++] = pts[i - 1];
    }
    hull.resize(k - 1);
    return hull;
}

namespace {

constexpr double kSampleInterval = 1.0 / 120.0;

// Lasso ring around the projected core of a structure: the 90% of projected
// points nearest their median, hull inflated by 10%, kept inside the surface.
std::vector<Vec2> lasso_ring(const std::vector<Vec3>& structure, const HeadPose& head,
                             const SurfaceGeometry& surface, std::uint64_t seed)
{
    const double dh = signed_distance(head.position, surface);
    std::vector<Vec2> projected;
    for (const auto& p : structure) {
        if (signed_distance(p, surface) < dh * 0.999)
            projected.push_back(to_surface_local(central_projection(p, head, surface), surface));
    }
    if (projected.size() < 3)
        throw Error(ErrorKind::Parameter, "target structure has too few points to encircle");
    std::vector<double> xs, ys;
    for (const auto& q : projected) {
        xs.push_back(q.x);
        ys.push_back(q.y);
    }
    const auto median = [](std::vector<double> v) {
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
        return v[v.size() / 2];
    };
    const Vec2 mid{median(xs), median(ys)};
    std::vector<double> dist;
    for (const auto& q : projected)
        dist.push_back(std::hypot(q.x - mid.x, q.y - mid.y));
    std::vector<double> sorted = dist;
    const auto cut_at = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(sorted.size()))) - 1;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(cut_at), sorted.end());
    const double cutoff = sorted[cut_at];
    std::vector<Vec2> core;
    for (std::size_t i = 0; i < projected.size(); ++i) {
        if (dist[i] <= cutoff)
            core.push_back(projected[i]);
    }
    std::vector<Vec2> hull = convex_hull(core);
    if (hull.size() < 3)
        throw Error(ErrorKind::Parameter, "target structure projects to a degenerate outline");
    Vec2 centroid{};
    for (const auto& v : hull)
        centroid = centroid + v;
    centroid = centroid * (1.0 / static_cast<double>(hull.size()));
    const double hx = 0.4995 * surface.width;
    const double hy = 0.4995 * surface.height;
    for (auto& v : hull) {
        v = centroid + (v - centroid) * 1.1;
        v.x = std::clamp(v.x, -hx, hx);
        v.y = std::clamp(v.y, -hy, hy);
    }
    // Start the stroke at a seed-dependent hull vertex.
    std::rotate(hull.begin(), hull.begin() + static_cast<std::ptrdiff_t>(seed % hull.size()), hull.end());
    hull.push_back(hull.front());

    std::vector<Vec3> ring3;
    for (const auto& v : hull)
        ring3.push_back({v.x, v.y, 0.0});
    const double spacing = std::max(polyline_length(ring3) / 128.0, 1e-6);
    std::vector<Vec2> out;
    for (const auto& p : resample_polyline(ring3, spacing))
        out.push_back({p.x, p.y});
    return out;
}

const Spine& find_spine(const LabeledCloud& labeled, int target)
{
    for (const auto& s : labeled.spines) {
        if (s.label == target)
            return s;
    }
    throw Error(ErrorKind::Parameter, "no spine for structure " + std::to_string(target));
}

void push_sample(InputTrace& trace, const Vec3& p, Space space)
{
    InputSample s;
    s.position = p;
    s.timestamp = static_cast<double>(trace.samples.size()) * kSampleInterval;
    s.source = space == Space::Surface ? InputSource::Pen : InputSource::Hand;
    s.declared_space = space;
    trace.samples.push_back(s);
}

}  // namespace

InputTrace gen_scripted_trace(TraceKind kind, const LabeledCloud& labeled, int target,
                              const SurfaceGeometry& surface, const HeadPose& head, std::uint64_t seed)
{
    validate_surface(surface);
    if (!(signed_distance(head.position, surface) > 0.0))
        throw Error(ErrorKind::Geometry, "head must be above the surface");
    std::vector<Vec3> structure;
    for (std::size_t i = 0; i < labeled.labels.size(); ++i) {
        if (labeled.labels[i] == target)
            structure.push_back(labeled.cloud.positions[i]);
    }
    if (structure.empty())
        throw Error(ErrorKind::Parameter, "target structure " + std::to_string(target) + " is empty");

    InputTrace trace;
    trace.meta = {{"generator", to_string(kind)}, {"target", target}, {"seed", seed}, {"rng", kRngAlgorithm}};
    Rng rng(seed);

    switch (kind) {
    case TraceKind::LassoAroundCluster: {
        for (const auto& uv : lasso_ring(structure, head, surface, seed))
            push_sample(trace, from_surface_local(uv, surface), Space::Surface);
        trace.meta["technique"] = "cloud-lasso";
        break;
    }
    case TraceKind::BrushAlongFilament: {
        std::vector<Vec3> spine = find_spine(labeled, target).points;
        if (signed_distance(spine.front(), surface) < signed_distance(spine.back(), surface))
            std::reverse(spine.begin(), spine.end());
        const double spacing = polyline_length(spine) / 200.0;
        const double jitter = 0.05 * spacing;
        for (const auto& p : resample_polyline(spine, spacing)) {
            const Vec3 wobble{jitter * rng.normal(), jitter * rng.normal(), jitter * rng.normal()};
            if (signed_distance(p, surface) > 0.0) {
                const Vec3 q = p + wobble;
                if (signed_distance(q, surface) > 0.0 && signed_distance(q, surface) < signed_distance(head.position, surface))
                    push_sample(trace, q, Space::Air);
                continue;
            }
            const Vec3 on_plane = central_projection(p, head, surface);
            if (point_in_surface_rect(on_plane, surface, 1e-9))
                push_sample(trace, on_plane, Space::Surface);
        }
        trace.meta["technique"] = "brush-wyp";
        break;
    }
    case TraceKind::MixedCrossSpace: {
        std::vector<Vec3> spine = find_spine(labeled, target).points;
        if (signed_distance(spine.front(), surface) < signed_distance(spine.back(), surface))
            std::reverse(spine.begin(), spine.end());
        const double spacing = polyline_length(spine) / 200.0;
        for (const auto& p : resample_polyline(spine, spacing)) {
            if (signed_distance(p, surface) > 0.0)
                push_sample(trace, p, Space::Air);
            else
                break;
        }
        std::vector<Vec3> below;
        for (const auto& p : structure) {
            if (signed_distance(p, surface) <= 0.0)
                below.push_back(p);
        }
        if (trace.samples.empty() || below.size() < 3)
            throw Error(ErrorKind::Parameter, "target structure does not cross the surface");
        for (const auto& uv : lasso_ring(below, head, surface, seed))
            push_sample(trace, from_surface_local(uv, surface), Space::Surface);
        trace.meta["technique"] = "brush-lasso";
        break;
    }
    }
    if (trace.samples.empty())
        throw Error(ErrorKind::Parameter, "scripted trace produced no samples");
    return trace;
}

std::string format_labels_csv(const std::vector<int>& labels)
{
    std::ostringstream out;
    out << "label\n";
    for (int l : labels)
        out << l << '\n';
    return out.str();
}

std::vector<int> parse_labels_csv(const std::string& text)
{
    std::vector<int> labels;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (line_no == 1 && line == "label")
            continue;
        std::size_t used = 0;
        int value = 0;
        try {
            value = std::stoi(line, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != line.size())
            throw Error(ErrorKind::Parse, "labels line " + std::to_string(line_no) + ": not an integer");
        labels.push_back(value);
    }
    return labels;
}

}  // namespace xrsel
