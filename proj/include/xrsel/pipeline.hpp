#pragma once

#include <optional>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "xrsel/geometry.hpp"
#include "xrsel/kde.hpp"
#include "xrsel/selection.hpp"
#include "xrsel/traces.hpp"

namespace xrsel {

struct Scene {
    SurfaceGeometry surface;
    HeadPose head;
    std::optional<double> far_dist;
};

/// {surface:{center,axis_x,axis_z,width,height}, head:{position}, far?}
Scene scene_from_json(const nlohmann::json& doc);
nlohmann::json scene_to_json(const Scene& scene);

/// Surface camera for the scene; the far plane defaults to near + 4 x the
/// grid diagonal.
ProjectionSetup scene_camera(const Scene& scene, const GridBox& grid);

nlohmann::json projection_to_json(const ProjectionSetup& setup);

enum class Technique { Brush, BrushWyp, BrushLasso, CloudLasso };

Technique parse_technique(const std::string& name);
const char* to_string(Technique technique);

struct SelectOptions {
    double radius = 0.0;      // <= 0 selects default_brush_radius
    double ray_step = 0.0;    // <= 0 selects default_ray_step
    double contact_tolerance = kDefaultContactTolerance;
};

/// Segments the trace against the scene and runs one technique.
SelectionResult run_selection(Technique technique, const InputTrace& trace, const Scene& scene,
                              const DensityField& field, std::span<const Vec3> points, const SelectOptions& options);

/// {"technique","rho0","selected_points","node_count","N_VCR"}
nlohmann::json selection_to_json(const SelectionResult& result);

/// Wavefront OBJ with v/f records only.
std::string mesh_to_obj(const TriangleMesh& mesh);

/// Canonical JSON text used for every file and HTTP body.
std::string dump_json(const nlohmann::json& doc);

struct PipelineOptions {
    int resolution = kDefaultResolution;
    double padding = 0.05;
    KdeParams kde;
    SelectOptions select;
};

/// End-to-end run in the surface frame: cloud, trace and head are expressed
/// in surface-local coordinates before the grid is fitted, so the outcome
/// depends only on the relative placement of data, surface and head.
SelectionResult run_pipeline(const PointCloud& cloud, const Scene& scene, const InputTrace& trace,
                             Technique technique, const PipelineOptions& options);

}  // namespace xrsel
