#include "xrsel/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "xrsel/error.hpp"

namespace xrsel {

namespace {

constexpr double kAxisTol = 1e-9;

bool unit_length(const Vec3& v) { return std::abs(norm(v) - 1.0) < kAxisTol; }

}  // namespace

void validate_surface(const SurfaceGeometry& surface)
{
    if (!is_finite(surface.center) || !is_finite(surface.axis_x) || !is_finite(surface.axis_z))
        throw Error(ErrorKind::Validation, "surface has non-finite components");
    if (!unit_length(surface.axis_x) || !unit_length(surface.axis_z))
        throw Error(ErrorKind::Validation, "surface axes must be unit length");
    if (std::abs(dot(surface.axis_x, surface.axis_z)) >= kAxisTol)
        throw Error(ErrorKind::Validation, "surface axis_x must be orthogonal to axis_z");
    if (!(surface.width > 0.0) || !(surface.height > 0.0) || !std::isfinite(surface.width) ||
        !std::isfinite(surface.height))
        throw Error(ErrorKind::Validation, "surface width and height must be positive");
}

Frame surface_frame(const SurfaceGeometry& surface)
{
    validate_surface(surface);
    return {surface.axis_x, cross(surface.axis_z, surface.axis_x), surface.axis_z};
}

double signed_distance(const Vec3& point, const SurfaceGeometry& surface)
{
    return dot(point - surface.center, surface.axis_z);
}

Vec2 to_surface_local(const Vec3& point, const SurfaceGeometry& surface)
{
    const Vec3 d = point - surface.center;
    const Vec3 axis_y = cross(surface.axis_z, surface.axis_x);
    return {dot(d, surface.axis_x), dot(d, axis_y)};
}

Vec3 from_surface_local(const Vec2& uv, const SurfaceGeometry& surface)
{
    const Vec3 axis_y = cross(surface.axis_z, surface.axis_x);
    return surface.center + surface.axis_x * uv.x + axis_y * uv.y;
}

Vec3 project_onto_plane(const Vec3& point, const SurfaceGeometry& surface)
{
    return point - surface.axis_z * signed_distance(point, surface);
}

Mat4 ProjectionSetup::view_matrix() const
{
    const Vec3 t = mul(view_rotation, eye);
    Mat4 m{};
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < 3; ++c)
            m[r][c] = view_rotation[r][c];
    }
    m[0][3] = -t.x;
    m[1][3] = -t.y;
    m[2][3] = -t.z;
    m[3][3] = 1.0;
    return m;
}

Vec3 ProjectionSetup::to_camera(const Vec3& world) const { return mul(view_rotation, world - eye); }

Mat4 frustum_matrix(const Vec3& corner_bl, const Vec3& corner_tr, double near_dist, double far_dist)
{
    const double l = corner_bl.x;
    const double r = corner_tr.x;
    const double b = corner_bl.y;
    const double t = corner_tr.y;
    const double n = near_dist;
    const double f = far_dist;
    Mat4 m{};
    m[0][0] = 2.0 * n / (r - l);
    m[0][2] = (r + l) / (r - l);
    m[1][1] = 2.0 * n / (t - b);
    m[1][2] = (t + b) / (t - b);
    m[2][2] = -(f + n) / (f - n);
    m[2][3] = -2.0 * f * n / (f - n);
    m[3][2] = -1.0;
    return m;
}

ProjectionSetup compute_surface_camera(const HeadPose& head, const SurfaceGeometry& surface,
                                       double far_dist)
{
    const Frame frame = surface_frame(surface);
    if (!is_finite(head.position))
        throw Error(ErrorKind::Validation, "head position is not finite");
    const double near_dist = signed_distance(head.position, surface);
    if (!(near_dist > 0.0))
        throw Error(ErrorKind::Geometry, "head must be strictly above the surface plane");
    if (!(far_dist > near_dist) || !std::isfinite(far_dist))
        throw Error(ErrorKind::Parameter, "far distance must exceed the head-to-surface distance");

    ProjectionSetup setup;
    setup.view_rotation = {{{frame.axis_x.x, frame.axis_x.y, frame.axis_x.z},
                            {frame.axis_y.x, frame.axis_y.y, frame.axis_y.z},
                            {frame.axis_z.x, frame.axis_z.y, frame.axis_z.z}}};
    setup.eye = head.position;

    // The camera z axis is the surface normal, so the whole surface sits at
    // local z = -near.
    const Vec3 c = setup.to_camera(surface.center);
    setup.center_local = {c.x, c.y, -near_dist};
    setup.corner_bl = {c.x - 0.5 * surface.width, c.y - 0.5 * surface.height, -near_dist};
    setup.corner_tr = {c.x + 0.5 * surface.width, c.y + 0.5 * surface.height, -near_dist};
    setup.near_dist = near_dist;
    setup.far_dist = far_dist;
    setup.projection = frustum_matrix(setup.corner_bl, setup.corner_tr, near_dist, far_dist);
    return setup;
}

std::optional<NdcPoint> try_project(const Vec3& point, const ProjectionSetup& setup)
{
    const Vec3 local = setup.to_camera(point);
    const auto clip = mul(setup.projection, {local.x, local.y, local.z, 1.0});
    const double w = clip[3];
    if (std::abs(w) <= 1e-12 * std::max(1.0, setup.near_dist))
        return std::nullopt;
    NdcPoint out;
    out.x = clip[0] / w;
    out.y = clip[1] / w;
    out.depth = clip[2] / w;
    out.w = w;
    out.in_frustum = w > 0.0 && std::abs(out.x) <= 1.0 && std::abs(out.y) <= 1.0 &&
                     std::abs(out.depth) <= 1.0;
    return out;
}

NdcPoint project_to_surface(const Vec3& point, const ProjectionSetup& setup)
{
    auto ndc = try_project(point, setup);
    if (!ndc)
        throw Error(ErrorKind::Degenerate, "point lies in the eye plane of the surface camera");
    return *ndc;
}

Ray surface_ray(const Vec3& surface_sample, const HeadPose& head)
{
    const Vec3 d = surface_sample - head.position;
    const double len = norm(d);
    if (!(len > 0.0))
        throw Error(ErrorKind::Degenerate, "surface sample coincides with the head position");
    return {surface_sample, d / len};
}

bool point_in_surface_rect(const Vec3& point, const SurfaceGeometry& surface, double eps)
{
    if (std::abs(signed_distance(point, surface)) > eps)
        return false;
    const Vec2 uv = to_surface_local(point, surface);
    return std::abs(uv.x) <= 0.5 * surface.width && std::abs(uv.y) <= 0.5 * surface.height;
}

double default_far(double near_dist, double diagonal) { return near_dist + 4.0 * diagonal; }

SurfaceGeometry tilted_surface(double tilt_deg, double width, double height)
{
    const double t = tilt_deg * std::numbers::pi / 180.0;
    SurfaceGeometry s;
    s.center = {0.0, 0.0, 0.0};
    s.axis_x = {1.0, 0.0, 0.0};
    s.axis_z = {0.0, -std::sin(t), std::cos(t)};
    s.width = width;
    s.height = height;
    return s;
}

}  // namespace xrsel
