#include "xrsel/selection.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "xrsel/error.hpp"
#include "xrsel/marching_cubes.hpp"

namespace xrsel {

namespace {

void require_same_grid(const GridBox& a, const GridBox& b)
{
    if (!(a == b))
        throw Error(ErrorKind::Validation, "selection operands live on different grids");
}

void require_mask_fits(const DensityField& field, const NodeMask& mask)
{
    require_same_grid(field.grid, mask.grid);
    if (mask.bits.size() != field.values.size())
        throw Error(ErrorKind::Validation, "mask size does not match the field");
}

double point_segment_distance2(const Vec3& p, const Vec3& a, const Vec3& b)
{
    const Vec3 ab = b - a;
    const double len2 = norm2(ab);
    double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return norm2(p - (a + ab * t));
}

// Node index range [lo, hi] covering the interval [a, b] along one axis.
std::array<int, 2> node_span(double a, double b, double min, double step, int n)
{
    const int lo = std::max(0, static_cast<int>(std::floor((a - min) / step)));
    const int hi = std::min(n - 1, static_cast<int>(std::ceil((b - min) / step)));
    return {lo, hi};
}

// Parametric interval of the ray inside the box, clipped to t >= 0.
std::optional<std::array<double, 2>> clip_ray_to_box(const Ray& ray, const GridBox& g)
{
    double t0 = 0.0;
    double t1 = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < 3; ++a) {
        const double o = ray.origin[a];
        const double d = ray.direction[a];
        if (d == 0.0) {
            if (o < g.min[a] || o > g.max[a])
                return std::nullopt;
            continue;
        }
        double ta = (g.min[a] - o) / d;
        double tb = (g.max[a] - o) / d;
        if (ta > tb)
            std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    if (!(t1 >= t0))
        return std::nullopt;
    return std::array<double, 2>{t0, t1};
}

// Sample parameters t0, t0 + step, ... up to t1.
std::vector<double> fixed_steps(double t0, double t1, double step)
{
    std::vector<double> ts;
    const auto count = static_cast<std::size_t>(std::floor((t1 - t0) / step + 1e-9));
    ts.reserve(count + 1);
    for (std::size_t k = 0; k <= count; ++k)
        ts.push_back(t0 + static_cast<double>(k) * step);
    return ts;
}

}  // namespace

std::size_t NodeMask::count() const
{
    return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

NodeMask mask_union(const NodeMask& a, const NodeMask& b)
{
    require_same_grid(a.grid, b.grid);
    NodeMask out(a.grid);
    for (std::size_t i = 0; i < out.bits.size(); ++i)
        out.bits[i] = (a.bits[i] | b.bits[i]) ? 1 : 0;
    return out;
}

NodeMask mask_difference(const NodeMask& a, const NodeMask& b)
{
    require_same_grid(a.grid, b.grid);
    NodeMask out(a.grid);
    for (std::size_t i = 0; i < out.bits.size(); ++i)
        out.bits[i] = (a.bits[i] && !b.bits[i]) ? 1 : 0;
    return out;
}

double default_brush_radius(const GridBox& grid) { return 0.025 * grid.diagonal(); }

double default_ray_step(const GridBox& grid) { return 0.5 * grid.min_cell_edge(); }

NodeMask brush_voi(const std::vector<Vec3>& path, double radius, const GridBox& grid)
{
    validate_grid(grid);
    if (path.empty())
        throw Error(ErrorKind::Parameter, "brush path is empty");
    if (!(radius > 0.0) || !std::isfinite(radius))
        throw Error(ErrorKind::Parameter, "brush radius must be positive");
    NodeMask mask(grid);
    const Vec3 step = grid.cell_size();
    const double r2 = radius * radius;
    const std::size_t segments = path.size() == 1 ? 1 : path.size() - 1;
    for (std::size_t s = 0; s < segments; ++s) {
        const Vec3 a = path[s];
        const Vec3 b = path.size() == 1 ? path[s] : path[s + 1];
        std::array<std::array<int, 2>, 3> span{};
        for (std::size_t ax = 0; ax < 3; ++ax)
            span[ax] = node_span(std::min(a[ax], b[ax]) - radius, std::max(a[ax], b[ax]) + radius, grid.min[ax],
                                 step[ax], grid.resolution[ax]);
        for (int k = span[2][0]; k <= span[2][1]; ++k)
            for (int j = span[1][0]; j <= span[1][1]; ++j)
                for (int i = span[0][0]; i <= span[0][1]; ++i) {
                    const std::size_t idx = grid.index(i, j, k);
                    if (!mask.test(idx) && point_segment_distance2(grid.node_position(i, j, k), a, b) <= r2)
                        mask.set(idx);
                }
    }
    return mask;
}

double threshold_mean_density(const DensityField& field, const NodeMask& region)
{
    require_mask_fits(field, region);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < region.bits.size(); ++i) {
        if (region.bits[i]) {
            sum += static_cast<double>(field.values[i]);
            ++n;
        }
    }
    if (n == 0)
        throw Error(ErrorKind::EmptyRegion, "no region of interest: the mask holds no grid node");
    return sum / static_cast<double>(n);
}

NodeMask select_volume(const DensityField& field, const NodeMask& region, double rho0)
{
    require_mask_fits(field, region);
    if (std::isnan(rho0))
        throw Error(ErrorKind::Parameter, "density threshold is not a number");
    NodeMask out(field.grid);
    for (std::size_t i = 0; i < region.bits.size(); ++i)
        out.bits[i] = (region.bits[i] && static_cast<double>(field.values[i]) > rho0) ? 1 : 0;
    return out;
}

NodeMask clip_mask_above(const NodeMask& mask, const SurfaceGeometry& surface)
{
    NodeMask out(mask.grid);
    for (std::size_t i = 0; i < mask.bits.size(); ++i) {
        if (mask.bits[i] && signed_distance(mask.grid.node_position(i), surface) > 0.0)
            out.bits[i] = 1;
    }
    return out;
}

std::optional<Vec3> ray_max_density(const Ray& ray, const DensityField& field, double step)
{
    if (!(step > 0.0))
        throw Error(ErrorKind::Parameter, "ray step must be positive");
    const auto range = clip_ray_to_box(ray, field.grid);
    if (!range)
        return std::nullopt;
    const auto [t0, t1] = *range;
    const GridBox& g = field.grid;
    const Vec3 cell = g.cell_size();

    std::vector<double> breaks = fixed_steps(t0, t1, step);
    breaks.push_back(t1);
    for (std::size_t a = 0; a < 3; ++a) {
        const double d = ray.direction[a];
        if (d == 0.0)
            continue;
        for (int i = 0; i < g.resolution[a]; ++i) {
            const double t = (g.min[a] + i * cell[a] - ray.origin[a]) / d;
            if (t > t0 && t < t1)
                breaks.push_back(t);
        }
    }
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    // Parameters stay within [t0, t1]; clamping keeps rounding at the exit
    // face from reading as outside the box.
    const auto point_at = [&](double t) {
        Vec3 p = ray.origin + ray.direction * t;
        for (std::size_t a = 0; a < 3; ++a)
            p[a] = std::clamp(p[a], g.min[a], g.max[a]);
        return p;
    };
    const auto density_at = [&](double t) { return sample_density(field, point_at(t)); };
    double best_t = t0;
    double best = -1.0;
    const auto consider = [&](double t, double v) {
        if (v > best || (v == best && t < best_t)) {
            best = v;
            best_t = t;
        }
    };

    for (std::size_t s = 0; s < breaks.size(); ++s) {
        const double a = breaks[s];
        const double fa = density_at(a);
        consider(a, fa);
        if (s + 1 == breaks.size())
            break;
        const double b = breaks[s + 1];
        const double len = b - a;
        if (!(len > 1e-12 * step))
            continue;
        // Within one cell the trilinear profile is a cubic in t; fit it exactly
        // from four samples and check its interior critical points.
        const double f1 = density_at(a + len / 3.0);
        const double f2 = density_at(a + 2.0 * len / 3.0);
        const double f3 = density_at(b);
        // Cubic c0 + c1 s + c2 s^2 + c3 s^3 through s = 0, 1/3, 2/3, 1.
        const double c1 = (-11.0 * fa + 18.0 * f1 - 9.0 * f2 + 2.0 * f3) / 2.0;
        const double c2 = (18.0 * fa - 45.0 * f1 + 36.0 * f2 - 9.0 * f3) / 2.0;
        const double c3 = (-9.0 * fa + 27.0 * f1 - 27.0 * f2 + 9.0 * f3) / 2.0;
        // Roots of c1 + 2 c2 s + 3 c3 s^2.
        double roots[2];
        int n_roots = 0;
        const double qa = 3.0 * c3;
        const double qb = 2.0 * c2;
        const double qc = c1;
        const double scale = std::max({std::abs(qa), std::abs(qb), std::abs(qc)});
        if (scale == 0.0)
            continue;
        if (std::abs(qa) <= 1e-12 * scale) {
            if (std::abs(qb) > 1e-12 * scale)
                roots[n_roots++] = -qc / qb;
        } else {
            const double disc = qb * qb - 4.0 * qa * qc;
            if (disc >= 0.0) {
                const double sq = std::sqrt(disc);
                const double q = -0.5 * (qb + std::copysign(sq, qb));
                roots[n_roots++] = q / qa;
                if (q != 0.0)
                    roots[n_roots++] = qc / q;
            }
        }
        std::sort(roots, roots + n_roots);
        for (int r = 0; r < n_roots; ++r) {
            if (roots[r] > 0.0 && roots[r] < 1.0) {
                const double t = a + roots[r] * len;
                consider(t, density_at(t));
            }
        }
    }
    if (!(best > 0.0))
        return std::nullopt;
    return point_at(best_t);
}

std::optional<Vec3> ray_accumulated_jump(const Ray& ray, const DensityField& field, double step)
{
    if (!(step > 0.0))
        throw Error(ErrorKind::Parameter, "ray step must be positive");
    const auto range = clip_ray_to_box(ray, field.grid);
    if (!range)
        return std::nullopt;
    const std::vector<double> ts = fixed_steps((*range)[0], (*range)[1], step);
    // Increment of the accumulated value over each step.
    std::vector<double> rise(ts.size() + 1, 0.0);
    for (std::size_t k = 0; k < ts.size(); ++k)
        rise[k] = sample_density(field, ray.origin + ray.direction * ts[k]) * step;

    std::size_t steepest = 0;
    for (std::size_t k = 1; k < ts.size(); ++k) {
        if (rise[k] > rise[steepest])
            steepest = k;
    }
    if (!(rise[steepest] > 0.0))
        return std::nullopt;
    // Most negative second difference at or after the steepest rise marks the
    // end of the jump.
    std::size_t pick = steepest;
    double most_negative = 0.0;
    for (std::size_t k = steepest; k < ts.size(); ++k) {
        const double d2 = rise[k + 1] - rise[k];
        if (d2 < most_negative) {
            most_negative = d2;
            pick = k;
        }
    }
    return ray.origin + ray.direction * ts[pick];
}

Lasso lasso_from_surface_samples(const std::vector<Vec3>& surface_samples, const SurfaceGeometry& surface)
{
    Lasso lasso;
    for (const auto& p : surface_samples) {
        const Vec2 uv = to_surface_local(p, surface);
        if (lasso.vertices.empty() || !(lasso.vertices.back() == uv))
            lasso.vertices.push_back(uv);
    }
    while (lasso.vertices.size() > 1 && lasso.vertices.back() == lasso.vertices.front())
        lasso.vertices.pop_back();
    std::vector<Vec2> distinct;
    for (const auto& v : lasso.vertices) {
        if (std::find(distinct.begin(), distinct.end(), v) == distinct.end())
            distinct.push_back(v);
        if (distinct.size() >= 3)
            break;
    }
    if (distinct.size() < 3)
        throw Error(ErrorKind::Parameter, "a lasso needs at least three distinct surface samples");
    lasso.closed = true;
    return lasso;
}

bool lasso_contains(const Lasso& lasso, const Vec2& p)
{
    const auto& v = lasso.vertices;
    bool inside = false;
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
        if ((v[i].y > p.y) != (v[j].y > p.y)) {
            const double x = v[j].x + (p.y - v[j].y) * (v[i].x - v[j].x) / (v[i].y - v[j].y);
            if (p.x < x)
                inside = !inside;
        }
    }
    return inside;
}

NodeMask lasso_frustum_mask(const Lasso& lasso, const ProjectionSetup& setup, const SurfaceGeometry& surface,
                            const GridBox& grid, HalfSpace half_space)
{
    validate_grid(grid);
    NodeMask mask(grid);
    if (lasso.vertices.size() < 3)
        return mask;
    double umin = lasso.vertices[0].x, umax = umin, vmin = lasso.vertices[0].y, vmax = vmin;
    for (const auto& p : lasso.vertices) {
        umin = std::min(umin, p.x);
        umax = std::max(umax, p.x);
        vmin = std::min(vmin, p.y);
        vmax = std::max(vmax, p.y);
    }
    const double half_w = 0.5 * (setup.corner_tr.x - setup.corner_bl.x);
    const double half_h = 0.5 * (setup.corner_tr.y - setup.corner_bl.y);
    for (std::size_t idx = 0; idx < mask.bits.size(); ++idx) {
        const Vec3 node = grid.node_position(idx);
        if (half_space == HalfSpace::BelowOnly && signed_distance(node, surface) > 0.0)
            continue;
        const auto ndc = try_project(node, setup);
        if (!ndc || !(ndc->w > 0.0))
            continue;
        const Vec2 uv{ndc->x * half_w, ndc->y * half_h};
        if (uv.x < umin || uv.x > umax || uv.y < vmin || uv.y > vmax)
            continue;
        if (lasso_contains(lasso, uv))
            mask.set(idx);
    }
    return mask;
}

std::vector<std::uint32_t> points_in_selection(std::span<const Vec3> points, const DensityField& field,
                                               const NodeMask& region, double rho0)
{
    std::vector<std::uint32_t> out;
    if (points.empty() || std::isnan(rho0))
        return out;
    const NodeMask volume = select_volume(field, region, rho0);
    const GridBox& g = field.grid;
    const Vec3 step = g.cell_size();
    for (std::size_t p = 0; p < points.size(); ++p) {
        const Vec3& x = points[p];
        if (!g.contains(x))
            continue;
        int c[3];
        for (std::size_t a = 0; a < 3; ++a)
            c[a] = std::clamp(static_cast<int>(std::floor((x[a] - g.min[a]) / step[a])), 0, g.resolution[a] - 2);
        bool touches = false;
        for (int corner = 0; corner < 8 && !touches; ++corner)
            touches = volume.test(g.index(c[0] + (corner & 1), c[1] + ((corner >> 1) & 1), c[2] + ((corner >> 2) & 1)));
        if (touches && sample_density(field, x) > rho0)
            out.push_back(static_cast<std::uint32_t>(p));
    }
    return out;
}

SelectionResult finalize_selection(std::string technique, const DensityField& field, NodeMask region,
                                   std::span<const Vec3> points)
{
    const auto started = std::chrono::steady_clock::now();
    SelectionResult result;
    result.technique = std::move(technique);
    result.rho0 = threshold_mean_density(field, region);
    result.volume = select_volume(field, region, result.rho0);
    result.mesh = marching_cubes(field, result.rho0, region);
    result.points = points_in_selection(points, field, region, result.rho0);
    result.diagnostics.region_nodes = region.count();
    result.diagnostics.volume_nodes = result.volume.count();
    result.region = std::move(region);
    result.diagnostics.elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    return result;
}

namespace {

SelectionResult empty_selection(std::string technique, const GridBox& grid)
{
    SelectionResult r;
    r.technique = std::move(technique);
    r.region = NodeMask(grid);
    r.volume = NodeMask(grid);
    return r;
}

}  // namespace

SelectionResult brush_select(const std::vector<Vec3>& path, const DensityField& field, double radius,
                             std::span<const Vec3> points)
{
    NodeMask region = brush_voi(path, radius, field.grid);
    SelectionResult result = region.none() ? empty_selection("brush", field.grid)
                                           : finalize_selection("brush", field, std::move(region), points);
    result.diagnostics.path = path;
    return result;
}

SelectionResult brush_wyp(const SegmentedTrace& trace, const DensityField& field, const HeadPose& head,
                          const SurfaceGeometry& surface, double radius, std::span<const Vec3> points, double step)
{
    validate_surface(surface);
    if (!(step > 0.0))
        step = default_ray_step(field.grid);
    std::vector<Vec3> combined;
    for (const auto& seg : trace.segments) {
        for (std::size_t i = seg.first; i < seg.first + seg.count; ++i) {
            if (seg.space == Space::Air) {
                combined.push_back(trace.air_samples[i]);
                continue;
            }
            const Ray ray = surface_ray(trace.surface_samples[i], head);
            if (auto poi = ray_max_density(ray, field, step))
                combined.push_back(*poi);
        }
    }
    if (combined.empty())
        return empty_selection("brush-wyp", field.grid);
    SelectionResult result = brush_select(combined, field, radius, points);
    result.technique = "brush-wyp";
    return result;
}

SelectionResult brush_lasso(const SegmentedTrace& trace, const DensityField& field, const HeadPose& head,
                            const SurfaceGeometry& surface, const ProjectionSetup& setup, double radius,
                            std::span<const Vec3> points)
{
    validate_surface(surface);
    (void)head;  // the camera in `setup` already encodes the head position
    NodeMask above(field.grid);
    if (!trace.air_samples.empty())
        above = clip_mask_above(brush_voi(trace.air_samples, radius, field.grid), surface);

    NodeMask below(field.grid);
    if (trace.surface_samples.size() >= 3) {
        try {
            const Lasso lasso = lasso_from_surface_samples(trace.surface_samples, surface);
            below = lasso_frustum_mask(lasso, setup, surface, field.grid, HalfSpace::BelowOnly);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Parameter)
                throw;
        }
    }
    NodeMask region = mask_union(above, below);
    if (region.none())
        throw Error(ErrorKind::EmptyRegion, "no region of interest: V_CR is empty");
    SelectionResult result = finalize_selection("brush-lasso", field, std::move(region), points);
    result.diagnostics.path = trace.air_samples;
    return result;
}

SelectionResult cloud_lasso(const Lasso& lasso, const DensityField& field, const ProjectionSetup& setup,
                            const SurfaceGeometry& surface, HalfSpace half_space, std::span<const Vec3> points)
{
    if (lasso.vertices.size() < 3)
        throw Error(ErrorKind::Parameter, "a lasso needs at least three vertices");
    NodeMask region = lasso_frustum_mask(lasso, setup, surface, field.grid, half_space);
    if (region.none())
        throw Error(ErrorKind::EmptyRegion, "no region of interest: the lasso frustum is empty");
    return finalize_selection("cloud-lasso", field, std::move(region), points);
}

SelectionResult subtract(const DensityField& field, const SelectionResult& current, const SelectionResult& removal)
{
    require_same_grid(current.volume.grid, removal.volume.grid);
    require_same_grid(current.volume.grid, field.grid);
    SelectionResult out;
    out.technique = current.technique;
    out.rho0 = current.rho0;
    out.region = mask_difference(current.region, removal.volume);
    out.volume = mask_difference(current.volume, removal.volume);
    std::set_difference(current.points.begin(), current.points.end(), removal.points.begin(), removal.points.end(),
                        std::back_inserter(out.points));
    out.mesh = marching_cubes(field, out.rho0, out.volume);
    out.diagnostics.region_nodes = out.region.count();
    out.diagnostics.volume_nodes = out.volume.count();
    return out;
}

}  // namespace xrsel
