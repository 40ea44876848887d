#include <doctest.h>

#include "oracles.hpp"
#include "xrsel/error.hpp"
#include "xrsel/kde.hpp"
#include "xrsel/pipeline.hpp"
#include "xrsel/synth.hpp"

using namespace xrsel;

namespace {

struct Rigid {
    Mat3 r{};
    Vec3 t;

    Vec3 point(const Vec3& p) const { return mul(r, p) + t; }
    Vec3 dir(const Vec3& d) const { return mul(r, d); }
};

Rigid random_rigid(oracle::Random& rng)
{
    const auto [ax, az] = oracle::random_axes(rng);
    const Vec3 ay = cross(az, ax);
    Rigid g;
    // Columns are the images of the world axes.
    for (int i = 0; i < 3; ++i) {
        g.r[i][0] = ax[i];
        g.r[i][1] = ay[i];
        g.r[i][2] = az[i];
    }
    g.t = rng.in_box({-3, -3, -3}, {3, 3, 3});
    return g;
}

struct DeskCase {
    Scene scene;
    LabeledCloud data;
    InputTrace trace;
};

DeskCase desk_case(std::uint64_t seed)
{
    DeskCase c;
    c.scene.surface = tilted_surface(21.0);
    const Frame f = surface_frame(c.scene.surface);
    c.scene.head.position = c.scene.surface.center + f.axis_z * 0.5 - f.axis_y * 0.2;
    c.data = gen_clusters(2, 1500, 0.02, 0.15, seed, c.scene.surface.center - f.axis_z * 0.15);
    c.trace = gen_scripted_trace(TraceKind::LassoAroundCluster, c.data, 0, c.scene.surface, c.scene.head, seed);
    return c;
}

DeskCase moved(const DeskCase& c, const Rigid& g)
{
    DeskCase m = c;
    m.scene.surface.center = g.point(c.scene.surface.center);
    m.scene.surface.axis_x = g.dir(c.scene.surface.axis_x);
    m.scene.surface.axis_z = g.dir(c.scene.surface.axis_z);
    m.scene.head.position = g.point(c.scene.head.position);
    for (auto& p : m.data.cloud.positions)
        p = g.point(p);
    for (auto& s : m.trace.samples)
        s.position = g.point(s.position);
    return m;
}

}  // namespace

TEST_SUITE("pipeline")
{
    TEST_CASE("scene json round trip")
    {
        Scene s;
        s.surface = tilted_surface(21.0);
        s.head.position = {0.1, -0.2, 0.6};
        s.far_dist = 3.5;
        const Scene back = scene_from_json(nlohmann::json::parse(dump_json(scene_to_json(s))));
        CHECK(back.surface.center == s.surface.center);
        CHECK(back.surface.axis_x == s.surface.axis_x);
        CHECK(back.surface.axis_z == s.surface.axis_z);
        CHECK(back.surface.width == s.surface.width);
        CHECK(back.head.position == s.head.position);
        CHECK(back.far_dist == s.far_dist);
    }

    TEST_CASE("scene json rejects malformed documents")
    {
        CHECK_THROWS_AS(scene_from_json(nlohmann::json::parse("{}")), Error);
        auto doc = scene_to_json(Scene{tilted_surface(0.0), {{0, 0, 1}, {}}, {}});
        doc["surface"]["axis_x"] = {1, 1, 0};
        CHECK_THROWS_AS(scene_from_json(doc), Error);
        doc = scene_to_json(Scene{tilted_surface(0.0), {{0, 0, 1}, {}}, {}});
        doc["head"]["position"] = "up";
        CHECK_THROWS_AS(scene_from_json(doc), Error);
    }

    TEST_CASE("default far plane encloses the grid")
    {
        Scene s;
        s.surface = tilted_surface(0.0);
        s.head.position = {0, 0, 0.5};
        const GridBox g = oracle::cube_grid(-0.3, 0.0, 8);
        const ProjectionSetup cam = scene_camera(s, g);
        CHECK(cam.near_dist == doctest::Approx(0.5));
        CHECK(cam.far_dist == doctest::Approx(0.5 + 4 * g.diagonal()));
        s.far_dist = 2.0;
        CHECK(scene_camera(s, g).far_dist == 2.0);
    }

    TEST_CASE("technique names")
    {
        for (auto t : {Technique::Brush, Technique::BrushWyp, Technique::BrushLasso, Technique::CloudLasso})
            CHECK(parse_technique(to_string(t)) == t);
        CHECK_THROWS_AS(parse_technique("magic-wand"), Error);
    }

    TEST_CASE("selection json carries the contract fields")
    {
        const DeskCase c = desk_case(3);
        PipelineOptions opt;
        opt.resolution = 32;
        const SelectionResult r = run_pipeline(c.data.cloud, c.scene, c.trace, Technique::CloudLasso, opt);
        const auto j = selection_to_json(r);
        CHECK(j["technique"] == "cloud-lasso");
        CHECK(j["rho0"].get<double>() == r.rho0);
        CHECK(j["selected_points"].size() == r.points.size());
        CHECK(j["node_count"] == r.volume.count());
        CHECK(j["N_VCR"] == r.region.count());
        CHECK(std::is_sorted(r.points.begin(), r.points.end()));
        CHECK(score(r.points, 0, c.data).f1 > 0.8);
    }

    TEST_CASE("mesh obj format")
    {
        TriangleMesh m;
        m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
        m.triangles = {{0, 1, 2}};
        CHECK(mesh_to_obj(m) == "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
    }

    TEST_CASE("run_selection matches the direct technique call")
    {
        const DeskCase c = desk_case(5);
        const GridBox grid = compute_bounds(c.data.cloud, 0.05, {32, 32, 32});
        const DensityField field = estimate_density_mbe(c.data.cloud, grid, {});
        const SegmentedTrace seg = segment_trace(c.trace, c.scene.surface);
        const Lasso lasso = lasso_from_surface_samples(seg.surface_samples, c.scene.surface);
        const SelectionResult direct = cloud_lasso(lasso, field, scene_camera(c.scene, grid), c.scene.surface,
                                                   HalfSpace::All, c.data.cloud.positions);
        const SelectionResult via = run_selection(Technique::CloudLasso, c.trace, c.scene, field,
                                                  c.data.cloud.positions, {});
        CHECK(via.volume == direct.volume);
        CHECK(via.points == direct.points);
    }

    TEST_CASE("rigid motion of scene and data leaves the selection unchanged")
    {
        oracle::Random rng(77);
        PipelineOptions opt;
        opt.resolution = 32;
        for (int k = 0; k < 4; ++k) {
            const DeskCase c = desk_case(10 + k);
            const SelectionResult base = run_pipeline(c.data.cloud, c.scene, c.trace, Technique::BrushLasso, opt);
            REQUIRE_FALSE(base.points.empty());
            const DeskCase m = moved(c, random_rigid(rng));
            const SelectionResult other = run_pipeline(m.data.cloud, m.scene, m.trace, Technique::BrushLasso, opt);
            CHECK(other.points == base.points);
            CHECK(other.volume == base.volume);
            CHECK(other.rho0 == base.rho0);
        }
    }
}
