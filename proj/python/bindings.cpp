#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "xrsel/error.hpp"
#include "xrsel/field.hpp"
#include "xrsel/kde.hpp"
#include "xrsel/pipeline.hpp"
#include "xrsel/synth.hpp"

namespace py = pybind11;
using namespace xrsel;
using nlohmann::json;

namespace {

using Points = py::array_t<double, py::array::c_style | py::array::forcecast>;

PointCloud to_cloud(const Points& points)
{
    if (points.ndim() != 2 || points.shape(1) != 3)
        throw py::value_error("points must have shape (n, 3)");
    PointCloud cloud;
    const auto r = points.unchecked<2>();
    cloud.positions.reserve(static_cast<std::size_t>(r.shape(0)));
    for (py::ssize_t i = 0; i < r.shape(0); ++i)
        cloud.positions.push_back({r(i, 0), r(i, 1), r(i, 2)});
    return cloud;
}

py::array_t<double> to_array(const std::vector<Vec3>& pts)
{
    py::array_t<double> out({static_cast<py::ssize_t>(pts.size()), py::ssize_t{3}});
    auto w = out.mutable_unchecked<2>();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        w(i, 0) = pts[i].x;
        w(i, 1) = pts[i].y;
        w(i, 2) = pts[i].z;
    }
    return out;
}

py::dict labeled_to_dict(const LabeledCloud& labeled)
{
    py::dict d;
    d["points"] = to_array(labeled.cloud.positions);
    d["labels"] = py::array_t<int>(static_cast<py::ssize_t>(labeled.labels.size()), labeled.labels.data());
    py::list spines;
    for (const auto& s : labeled.spines)
        spines.append(py::make_tuple(s.label, to_array(s.points)));
    d["spines"] = spines;
    return d;
}

}  // namespace

PYBIND11_MODULE(_xrsel, m)
{
    m.doc() = "Density-aware point-cloud selection engine";

    static py::exception<Error> error_type(m, "XrselError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p)
                std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetString(error_type.ptr(), (std::string(to_string(e.kind())) + ": " + e.what()).c_str());
        }
    });

    m.attr("RNG_ALGORITHM") = kRngAlgorithm;

    py::class_<DensityField>(m, "DensityField")
        .def_property_readonly("resolution", [](const DensityField& f) { return f.grid.resolution; })
        .def_property_readonly("min", [](const DensityField& f) { return std::array{f.grid.min.x, f.grid.min.y, f.grid.min.z}; })
        .def_property_readonly("max", [](const DensityField& f) { return std::array{f.grid.max.x, f.grid.max.y, f.grid.max.z}; })
        .def_property_readonly("values",
                               [](const DensityField& f) {
                                   const auto& r = f.grid.resolution;
                                   // Nodes are x-fastest, so the natural C shape is (nz, ny, nx).
                                   py::array_t<float> a({r[2], r[1], r[0]});
                                   std::copy(f.values.begin(), f.values.end(), a.mutable_data());
                                   return a;
                               })
        .def("sample", [](const DensityField& f, std::array<double, 3> p) { return sample_density(f, {p[0], p[1], p[2]}); })
        .def("mass", [](const DensityField& f) { return integrate_mass(f); })
        .def("save", [](const DensityField& f, const std::string& path) { save_field(f, path); });

    m.def("load_field", [](const std::string& path) { return load_field(path); });

    m.def(
        "estimate_density",
        [](const Points& points, int resolution, double padding, double alpha, double h0) {
            const PointCloud cloud = to_cloud(points);
            const GridBox grid = compute_bounds(cloud, padding, {resolution, resolution, resolution});
            KdeParams kde;
            kde.alpha = alpha;
            kde.pilot_bandwidth = h0;
            py::gil_scoped_release release;
            return estimate_density_mbe(cloud, grid, kde);
        },
        py::arg("points"), py::arg("resolution") = kDefaultResolution, py::arg("padding") = 0.05,
        py::arg("alpha") = 0.5, py::arg("h0") = 0.0);

    m.def("gen_clusters",
          [](std::size_t k, std::size_t n, double scale, double separation, std::uint64_t seed) {
              return labeled_to_dict(gen_clusters(k, n, scale, separation, seed));
          },
          py::arg("k"), py::arg("n"), py::arg("scale"), py::arg("separation"), py::arg("seed"));
    m.def("gen_shell",
          [](std::size_t n, double radius, double thickness, std::size_t noise, std::uint64_t seed) {
              return labeled_to_dict(gen_shell(n, radius, thickness, noise, seed));
          },
          py::arg("n"), py::arg("radius"), py::arg("thickness"), py::arg("noise"), py::arg("seed"));
    m.def("gen_filaments",
          [](std::size_t segments, std::size_t n, double thickness, std::uint64_t seed) {
              return labeled_to_dict(gen_filaments(segments, n, thickness, seed));
          },
          py::arg("segments"), py::arg("n"), py::arg("thickness"), py::arg("seed"));

    // JSON documents cross the boundary as text; the Python package wraps
    // them in dicts.
    m.def("_camera", [](const std::string& scene_json, const DensityField& field) {
        return dump_json(projection_to_json(scene_camera(scene_from_json(json::parse(scene_json)), field.grid)));
    });
    m.def("_scripted_trace", [](const std::string& kind, const Points& points, const std::vector<int>& labels,
                                int target, const std::string& scene_json, std::uint64_t seed) {
        LabeledCloud labeled;
        labeled.cloud = to_cloud(points);
        labeled.labels = labels;
        const Scene scene = scene_from_json(json::parse(scene_json));
        return dump_json(trace_to_json(
            gen_scripted_trace(parse_trace_kind(kind), labeled, target, scene.surface, scene.head, seed)));
    });
    m.def("_select", [](const DensityField& field, const Points& points, const std::string& trace_json,
                        const std::string& scene_json, const std::string& technique, double radius) {
        const PointCloud cloud = to_cloud(points);
        const Scene scene = scene_from_json(json::parse(scene_json));
        const InputTrace trace = parse_trace_text(trace_json);
        SelectOptions opts;
        opts.radius = radius;
        const SelectionResult r = run_selection(parse_technique(technique), trace, scene, field, cloud.positions, opts);
        return py::make_tuple(dump_json(selection_to_json(r)), mesh_to_obj(r.mesh));
    });
}
