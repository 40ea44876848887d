#pragma once

#include <optional>

#include "xrsel/vec.hpp"

namespace xrsel {

/// The physical touch surface: a rectangle in world space. `axis_z` is the
/// surface normal and points into the half-space the viewer occupies.
struct SurfaceGeometry {
    Vec3 center;
    Vec3 axis_x{1.0, 0.0, 0.0};
    Vec3 axis_z{0.0, 0.0, 1.0};
    double width = 0.637;
    double height = 0.438;
};

struct HeadPose {
    Vec3 position;
    std::optional<Vec3> gaze;
};

struct Frame {
    Vec3 axis_x;
    Vec3 axis_y;
    Vec3 axis_z;
};

/// The surface camera derived for one head position. Corners and near are in
/// camera-local coordinates; the camera looks down its -z axis onto the
/// surface, which is the near plane.
struct ProjectionSetup {
    Mat3 view_rotation{};  // world -> camera, rows are the camera axes
    Vec3 eye;
    Vec3 center_local;
    Vec3 corner_bl;
    Vec3 corner_tr;
    double near_dist = 0.0;
    double far_dist = 0.0;
    Mat4 projection{};

    Mat4 view_matrix() const;
    Vec3 to_camera(const Vec3& world) const;
};

struct Ray {
    Vec3 origin;
    Vec3 direction;
};

struct NdcPoint {
    double x = 0.0;
    double y = 0.0;
    double depth = 0.0;
    double w = 0.0;
    bool in_frustum = false;
};

/// Throws ErrorKind::Validation unless both axes are unit length and orthogonal
/// and the extents are positive.
void validate_surface(const SurfaceGeometry& surface);

Frame surface_frame(const SurfaceGeometry& surface);

double signed_distance(const Vec3& point, const SurfaceGeometry& surface);

/// Surface-local 2D coordinates (meters from the center along axis_x / axis_y).
Vec2 to_surface_local(const Vec3& point, const SurfaceGeometry& surface);
Vec3 from_surface_local(const Vec2& uv, const SurfaceGeometry& surface);

Vec3 project_onto_plane(const Vec3& point, const SurfaceGeometry& surface);

/// Builds the oblique surface camera for `head`: eye at the head, forward
/// perpendicular onto the surface, x aligned with the surface x, near plane on
/// the surface, far plane at `far_dist` from the eye.
ProjectionSetup compute_surface_camera(const HeadPose& head, const SurfaceGeometry& surface,
                                       double far_dist);

/// Off-axis frustum matrix from camera-local corners and clip distances.
Mat4 frustum_matrix(const Vec3& corner_bl, const Vec3& corner_tr, double near_dist, double far_dist);

/// Homogeneous transform and divide; empty when w vanishes.
std::optional<NdcPoint> try_project(const Vec3& point, const ProjectionSetup& setup);

/// Full homogeneous transform and divide. Throws ErrorKind::Degenerate when w
/// vanishes (the point lies in the eye plane).
NdcPoint project_to_surface(const Vec3& point, const ProjectionSetup& setup);

Ray surface_ray(const Vec3& surface_sample, const HeadPose& head);

bool point_in_surface_rect(const Vec3& point, const SurfaceGeometry& surface, double eps);

/// Far distance enclosing a dataset with bounding-box diagonal `diagonal`.
double default_far(double near_dist, double diagonal);

/// Desk configuration: a 0.637 m x 0.438 m surface centered at the origin and
/// inclined by `tilt_deg` about the world x axis (world z is up).
SurfaceGeometry tilted_surface(double tilt_deg, double width = 0.637, double height = 0.438);

}  // namespace xrsel
