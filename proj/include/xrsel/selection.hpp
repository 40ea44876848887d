#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xrsel/field.hpp"
#include "xrsel/geometry.hpp"
#include "xrsel/traces.hpp"

namespace xrsel {

/// One flag per grid node, same x-fastest order as DensityField.
struct NodeMask {
    GridBox grid;
    std::vector<std::uint8_t> bits;

    NodeMask() = default;
    explicit NodeMask(const GridBox& g) : grid(g), bits(g.node_count(), 0) {}

    bool test(std::size_t i) const { return bits[i] != 0; }
    void set(std::size_t i, bool on = true) { bits[i] = on ? 1 : 0; }
    std::size_t count() const;
    bool none() const { return count() == 0; }

    friend bool operator==(const NodeMask&, const NodeMask&) = default;
};

NodeMask mask_union(const NodeMask& a, const NodeMask& b);
NodeMask mask_difference(const NodeMask& a, const NodeMask& b);

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> triangles;

    bool empty() const { return triangles.empty(); }
};

/// Closed polygon in surface-local coordinates (meters from the surface center).
struct Lasso {
    std::vector<Vec2> vertices;
    bool closed = true;
};

enum class HalfSpace { BelowOnly, All };

struct SelectionDiagnostics {
    std::size_t region_nodes = 0;   // N_{V_CR}
    std::size_t volume_nodes = 0;   // |V|
    std::vector<Vec3> path;         // brush input actually used (POIs + air samples)
    double elapsed_ms = 0.0;        // never serialized
};

struct SelectionResult {
    std::string technique;
    NodeMask region;  // V_CR (or V_init / F)
    NodeMask volume;  // V
    double rho0 = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::uint32_t> points;  // sorted
    TriangleMesh mesh;
    SelectionDiagnostics diagnostics;

    bool empty() const { return volume.none() && points.empty(); }
};

/// Nodes within `radius` of the path polyline (a union of capsules; a single
/// point gives a ball).
NodeMask brush_voi(const std::vector<Vec3>& path, double radius, const GridBox& grid);

/// Default brush radius: 2.5% of the grid diagonal.
double default_brush_radius(const GridBox& grid);
/// Default ray step: half the smallest cell edge.
double default_ray_step(const GridBox& grid);

/// rho0: arithmetic mean of node densities inside the mask, summed in
/// ascending node order.
double threshold_mean_density(const DensityField& field, const NodeMask& region);

/// Nodes of the region whose density strictly exceeds rho0.
NodeMask select_volume(const DensityField& field, const NodeMask& region, double rho0);

NodeMask clip_mask_above(const NodeMask& mask, const SurfaceGeometry& surface);

/// Point of maximum interpolated density along the part of the ray inside B.
/// The ray is walked in fixed steps; each step interval is split at cell
/// crossings, where the trilinear profile is an exact cubic, and maximized
/// analytically. Ties go to the point nearest the ray origin.
std::optional<Vec3> ray_max_density(const Ray& ray, const DensityField& field, double step);

/// Depth pick at the end of the steepest rise of the accumulated value along
/// the ray.
std::optional<Vec3> ray_accumulated_jump(const Ray& ray, const DensityField& field, double step);

Lasso lasso_from_surface_samples(const std::vector<Vec3>& surface_samples, const SurfaceGeometry& surface);

/// Even-odd point-in-polygon test.
bool lasso_contains(const Lasso& lasso, const Vec2& p);

/// Nodes whose projection through the surface camera lands inside the lasso.
/// With BelowOnly, nodes above the plane are dropped (on-plane nodes count as
/// below).
NodeMask lasso_frustum_mask(const Lasso& lasso, const ProjectionSetup& setup, const SurfaceGeometry& surface,
                            const GridBox& grid, HalfSpace half_space);

/// Indices of points in a cell touching the selected volume whose
/// interpolated density exceeds rho0.
std::vector<std::uint32_t> points_in_selection(std::span<const Vec3> points, const DensityField& field,
                                               const NodeMask& region, double rho0);

/// Applies rho0 and V to a region of interest and computes mesh and points.
SelectionResult finalize_selection(std::string technique, const DensityField& field, NodeMask region,
                                   std::span<const Vec3> points);

SelectionResult brush_select(const std::vector<Vec3>& path, const DensityField& field, double radius,
                             std::span<const Vec3> points = {});

SelectionResult brush_wyp(const SegmentedTrace& trace, const DensityField& field, const HeadPose& head,
                          const SurfaceGeometry& surface, double radius, std::span<const Vec3> points = {},
                          double step = 0.0);

/// Throws ErrorKind::EmptyRegion when V_CR is empty.
SelectionResult brush_lasso(const SegmentedTrace& trace, const DensityField& field, const HeadPose& head,
                            const SurfaceGeometry& surface, const ProjectionSetup& setup, double radius,
                            std::span<const Vec3> points = {});

/// Throws ErrorKind::EmptyRegion when the frustum holds no node.
SelectionResult cloud_lasso(const Lasso& lasso, const DensityField& field, const ProjectionSetup& setup,
                            const SurfaceGeometry& surface, HalfSpace half_space = HalfSpace::All,
                            std::span<const Vec3> points = {});

/// Removes `removal` from `current`; the mesh is rebuilt over the remaining
/// volume at current's rho0.
SelectionResult subtract(const DensityField& field, const SelectionResult& current, const SelectionResult& removal);

}  // namespace xrsel
