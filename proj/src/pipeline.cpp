#include "xrsel/pipeline.hpp"

#include <cmath>
#include <sstream>

#include "xrsel/error.hpp"

namespace xrsel {

using nlohmann::json;

namespace {

Vec3 vec_from_json(const json& j, const char* what)
{
    if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() || !j[2].is_number())
        throw Error(ErrorKind::Parse, std::string(what) + " must be a [x,y,z] array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json vec_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

double number_field(const json& obj, const char* key)
{
    if (!obj.contains(key) || !obj[key].is_number())
        throw Error(ErrorKind::Parse, std::string("scene field '") + key + "' must be a number");
    return obj[key].get<double>();
}

json matrix_rows(const Mat4& m)
{
    json rows = json::array();
    for (const auto& r : m)
        rows.push_back(json::array({r[0], r[1], r[2], r[3]}));
    return rows;
}

}  // namespace

Scene scene_from_json(const json& doc)
{
    if (!doc.is_object() || !doc.contains("surface") || !doc["surface"].is_object())
        throw Error(ErrorKind::Parse, "scene needs a \"surface\" object");
    const auto& s = doc["surface"];
    Scene scene;
    scene.surface.center = vec_from_json(s.value("center", json()), "surface.center");
    scene.surface.axis_x = vec_from_json(s.value("axis_x", json()), "surface.axis_x");
    scene.surface.axis_z = vec_from_json(s.value("axis_z", json()), "surface.axis_z");
    scene.surface.width = number_field(s, "width");
    scene.surface.height = number_field(s, "height");
    validate_surface(scene.surface);
    if (!doc.contains("head") || !doc["head"].is_object())
        throw Error(ErrorKind::Parse, "scene needs a \"head\" object");
    scene.head.position = vec_from_json(doc["head"].value("position", json()), "head.position");
    if (doc["head"].contains("gaze") && !doc["head"]["gaze"].is_null())
        scene.head.gaze = vec_from_json(doc["head"]["gaze"], "head.gaze");
    if (doc.contains("far") && !doc["far"].is_null())
        scene.far_dist = number_field(doc, "far");
    return scene;
}

json scene_to_json(const Scene& scene)
{
    json doc;
    doc["surface"] = {{"center", vec_to_json(scene.surface.center)},
                      {"axis_x", vec_to_json(scene.surface.axis_x)},
                      {"axis_z", vec_to_json(scene.surface.axis_z)},
                      {"width", scene.surface.width},
                      {"height", scene.surface.height}};
    doc["head"] = {{"position", vec_to_json(scene.head.position)}};
    if (scene.head.gaze)
        doc["head"]["gaze"] = vec_to_json(*scene.head.gaze);
    if (scene.far_dist)
        doc["far"] = *scene.far_dist;
    return doc;
}

ProjectionSetup scene_camera(const Scene& scene, const GridBox& grid)
{
    const double near_dist = signed_distance(scene.head.position, scene.surface);
    const double far_dist = scene.far_dist ? *scene.far_dist : default_far(near_dist, grid.diagonal());
    return compute_surface_camera(scene.head, scene.surface, far_dist);
}

json projection_to_json(const ProjectionSetup& setup)
{
    json rot = json::array();
    for (const auto& r : setup.view_rotation)
        rot.push_back(json::array({r[0], r[1], r[2]}));
    return {{"eye", vec_to_json(setup.eye)},
            {"view_rotation", rot},
            {"view", matrix_rows(setup.view_matrix())},
            {"projection", matrix_rows(setup.projection)},
            {"corner_bl", vec_to_json(setup.corner_bl)},
            {"corner_tr", vec_to_json(setup.corner_tr)},
            {"center", vec_to_json(setup.center_local)},
            {"near", setup.near_dist},
            {"far", setup.far_dist}};
}

Technique parse_technique(const std::string& name)
{
    if (name == "brush")
        return Technique::Brush;
    if (name == "brush-wyp")
        return Technique::BrushWyp;
    if (name == "brush-lasso")
        return Technique::BrushLasso;
    if (name == "cloud-lasso")
        return Technique::CloudLasso;
    throw Error(ErrorKind::Parameter, "unknown technique '" + name + "'");
}

const char* to_string(Technique technique)
{
    switch (technique) {
    case Technique::Brush: return "brush";
    case Technique::BrushWyp: return "brush-wyp";
    case Technique::BrushLasso: return "brush-lasso";
    case Technique::CloudLasso: return "cloud-lasso";
    }
    return "";
}

SelectionResult run_selection(Technique technique, const InputTrace& trace, const Scene& scene,
                              const DensityField& field, std::span<const Vec3> points, const SelectOptions& options)
{
    const SegmentedTrace seg = segment_trace(trace, scene.surface, options.contact_tolerance);
    const double radius = options.radius > 0.0 ? options.radius : default_brush_radius(field.grid);
    switch (technique) {
    case Technique::Brush: {
        std::vector<Vec3> path;
        for (const auto& s : seg.segments) {
            const auto& src = s.space == Space::Air ? seg.air_samples : seg.surface_samples;
            path.insert(path.end(), src.begin() + static_cast<std::ptrdiff_t>(s.first),
                        src.begin() + static_cast<std::ptrdiff_t>(s.first + s.count));
        }
        return brush_select(path, field, radius, points);
    }
    case Technique::BrushWyp:
        return brush_wyp(seg, field, scene.head, scene.surface, radius, points, options.ray_step);
    case Technique::BrushLasso:
        return brush_lasso(seg, field, scene.head, scene.surface, scene_camera(scene, field.grid), radius, points);
    case Technique::CloudLasso: {
        const Lasso lasso = lasso_from_surface_samples(seg.surface_samples, scene.surface);
        return cloud_lasso(lasso, field, scene_camera(scene, field.grid), scene.surface, HalfSpace::All, points);
    }
    }
    throw Error(ErrorKind::Parameter, "unknown technique");
}

json selection_to_json(const SelectionResult& result)
{
    json doc;
    doc["technique"] = result.technique;
    doc["rho0"] = std::isfinite(result.rho0) ? json(result.rho0) : json(nullptr);
    doc["selected_points"] = result.points;
    doc["node_count"] = result.diagnostics.volume_nodes;
    doc["N_VCR"] = result.diagnostics.region_nodes;
    return doc;
}

std::string mesh_to_obj(const TriangleMesh& mesh)
{
    std::ostringstream out;
    out.precision(9);
    for (const auto& v : mesh.vertices)
        out << "v " << v.x << ' ' << v.y << ' ' << v.z << '\n';
    for (const auto& t : mesh.triangles)
        out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    return out.str();
}

std::string dump_json(const json& doc) { return doc.dump(2) + "\n"; }

SelectionResult run_pipeline(const PointCloud& cloud, const Scene& scene, const InputTrace& trace,
                             Technique technique, const PipelineOptions& options)
{
    const Frame frame = surface_frame(scene.surface);
    const auto to_local = [&](const Vec3& p) {
        // Snapping to a 1 nm lattice absorbs the rounding left by the rotation,
        // so rigidly moved inputs land on identical local coordinates.
        constexpr double kQuantum = 1e-9;
        const auto snap = [](double v) { return std::round(v / kQuantum) * kQuantum; };
        const Vec3 d = p - scene.surface.center;
        return Vec3{snap(dot(d, frame.axis_x)), snap(dot(d, frame.axis_y)), snap(dot(d, frame.axis_z))};
    };

    PointCloud local_cloud;
    local_cloud.positions.reserve(cloud.size());
    for (const auto& p : cloud.positions)
        local_cloud.positions.push_back(to_local(p));
    InputTrace local_trace = trace;
    for (auto& s : local_trace.samples)
        s.position = to_local(s.position);
    Scene local_scene;
    local_scene.surface.center = {};
    local_scene.surface.axis_x = {1.0, 0.0, 0.0};
    local_scene.surface.axis_z = {0.0, 0.0, 1.0};
    local_scene.surface.width = scene.surface.width;
    local_scene.surface.height = scene.surface.height;
    local_scene.head.position = to_local(scene.head.position);
    local_scene.far_dist = scene.far_dist;

    const GridBox grid = compute_bounds(local_cloud, options.padding,
                                        {options.resolution, options.resolution, options.resolution});
    const DensityField field = estimate_density_mbe(local_cloud, grid, options.kde);
    return run_selection(technique, local_trace, local_scene, field, local_cloud.positions, options.select);
}

}  // namespace xrsel
