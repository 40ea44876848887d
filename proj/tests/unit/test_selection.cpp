#include <doctest.h>

#include "oracles.hpp"
#include "xrsel/error.hpp"
#include "xrsel/kde.hpp"
#include "xrsel/selection.hpp"
#include "xrsel/synth.hpp"

using namespace xrsel;

namespace {

NodeMask random_mask(const GridBox& g, oracle::Random& rng, double p)
{
    NodeMask m(g);
    for (std::size_t i = 0; i < m.bits.size(); ++i)
        m.set(i, rng.uniform() < p);
    return m;
}

DensityField random_field(const GridBox& g, oracle::Random& rng)
{
    return oracle::make_field(g, [&](const Vec3&) { return rng.uniform(0.0, 10.0); });
}

// Surface z = 1 over the unit cube, head well above it.
struct Stage {
    SurfaceGeometry surface;
    HeadPose head;
    ProjectionSetup cam;
    GridBox grid = oracle::cube_grid(0, 1, 25);

    Stage()
    {
        surface.center = {0.5, 0.5, 1.0};
        surface.width = 1.2;
        surface.height = 1.0;
        head.position = {0.45, 0.35, 2.0};
        cam = compute_surface_camera(head, surface, 10.0);
    }
};

SegmentedTrace surface_only(const std::vector<Vec3>& pts)
{
    SegmentedTrace t;
    t.surface_samples = pts;
    t.segments.push_back({Space::Surface, 0, pts.size()});
    return t;
}

SegmentedTrace air_only(const std::vector<Vec3>& pts)
{
    SegmentedTrace t;
    t.air_samples = pts;
    t.segments.push_back({Space::Air, 0, pts.size()});
    return t;
}

}  // namespace

TEST_SUITE("selection")
{
    TEST_CASE("ball from a single point")
    {
        const GridBox g = oracle::cube_grid(0, 1, 21);
        const Vec3 c{0.52, 0.47, 0.5};
        const NodeMask m = brush_voi({c}, 0.2, g);
        for (std::size_t i = 0; i < m.bits.size(); ++i)
            REQUIRE(m.test(i) == (norm(g.node_position(i) - c) <= 0.2));
    }

    TEST_CASE("capsule matches brute-force segment distance")
    {
        oracle::Random rng(1);
        const GridBox g = oracle::cube_grid(-1, 1, 23);
        for (int t = 0; t < 20; ++t) {
            const Vec3 a = rng.in_box({-1, -1, -1}, {1, 1, 1});
            const Vec3 b = rng.in_box({-1, -1, -1}, {1, 1, 1});
            const double r = rng.uniform(0.05, 0.4);
            const NodeMask m = brush_voi({a, b}, r, g);
            for (std::size_t i = 0; i < m.bits.size(); ++i) {
                const double d = oracle::segment_distance(g.node_position(i), a, b);
                if (std::abs(d - r) > 1e-12)
                    REQUIRE(m.test(i) == (d <= r));
            }
        }
    }

    TEST_CASE("tiny brush between nodes is empty without error")
    {
        const GridBox g = oracle::cube_grid(0, 1, 11);
        CHECK(brush_voi({{0.05, 0.05, 0.05}}, 0.01, g).none());
        CHECK_THROWS_AS(brush_voi({{0.5, 0.5, 0.5}}, 0.0, g), Error);
        CHECK(brush_select({{0.05, 0.05, 0.05}}, oracle::make_field(g, [](const Vec3&) { return 1.0; }), 0.01).empty());
    }

    TEST_CASE("mean threshold and strict filter")
    {
        GridBox g = oracle::cube_grid(0, 1, 2);
        DensityField f = oracle::make_field(g, [](const Vec3&) { return 0.0; });
        f.values[0] = 1;
        f.values[3] = 2;
        f.values[5] = 6;
        NodeMask m(g);
        m.set(0);
        m.set(3);
        m.set(5);
        CHECK(threshold_mean_density(f, m) == 3.0);
        const NodeMask v = select_volume(f, m, 3.0);
        CHECK(v.count() == 1);
        CHECK(v.test(5));
        CHECK_THROWS_AS(threshold_mean_density(f, NodeMask(g)), Error);

        const DensityField u = oracle::make_field(oracle::cube_grid(0, 1, 9), [](const Vec3&) { return 0.7; });
        NodeMask all(u.grid);
        std::fill(all.bits.begin(), all.bits.end(), 1);
        CHECK(threshold_mean_density(u, all) == static_cast<double>(0.7f));
        CHECK(select_volume(u, all, threshold_mean_density(u, all)).none());
    }

    TEST_CASE("threshold and filter equal brute force on random instances")
    {
        oracle::Random rng(2);
        const GridBox g = oracle::cube_grid(0, 1, 12);
        for (int t = 0; t < 30; ++t) {
            const DensityField f = random_field(g, rng);
            const NodeMask m = random_mask(g, rng, rng.uniform(0.01, 0.9));
            if (m.none())
                continue;
            double sum = 0;
            std::size_t n = 0;
            for (std::size_t i = 0; i < m.bits.size(); ++i)
                if (m.bits[i]) {
                    sum += f.values[i];
                    ++n;
                }
            const double rho0 = threshold_mean_density(f, m);
            REQUIRE(rho0 == sum / static_cast<double>(n));
            const NodeMask v = select_volume(f, m, rho0);
            for (std::size_t i = 0; i < m.bits.size(); ++i)
                REQUIRE(v.test(i) == (m.test(i) && f.values[i] > rho0));
        }
    }

    TEST_CASE("clip above the plane")
    {
        Stage s;
        s.surface.center = {0.5, 0.5, 0.5};
        s.surface.axis_z = normalize(Vec3{0, -0.3, 1});
        s.surface.axis_x = {1, 0, 0};
        NodeMask all(s.grid);
        std::fill(all.bits.begin(), all.bits.end(), 1);
        const NodeMask a = clip_mask_above(all, s.surface);
        for (std::size_t i = 0; i < a.bits.size(); ++i)
            REQUIRE(a.test(i) == (signed_distance(s.grid.node_position(i), s.surface) > 0.0));

        SurfaceGeometry low;
        low.center = {0.5, 0.5, -1.0};
        CHECK(clip_mask_above(all, low) == all);
        SurfaceGeometry high;
        high.center = {0.5, 0.5, 2.0};
        CHECK(clip_mask_above(all, high).none());
    }

    TEST_CASE("ray maximum on a unimodal blob")
    {
        const GridBox g = oracle::cube_grid(0, 1, 33);
        const Vec3 c{0.41, 0.52, 0.47};
        const DensityField f = oracle::make_field(g, [&](const Vec3& p) { return std::exp(-norm2(p - c) / 0.02); });
        const Vec3 dir = normalize(Vec3{0.2, -0.1, -1.0});
        const Ray ray{c - dir * 2.0, dir};
        const double step = default_ray_step(g);
        const auto poi = ray_max_density(ray, f, step);
        REQUIRE(poi.has_value());
        CHECK(norm(*poi - c) <= step);
        CHECK_FALSE(ray_max_density({{5, 5, 5}, {0, 0, 1}}, f, step).has_value());
        const DensityField zero = oracle::make_field(g, [](const Vec3&) { return 0.0; });
        CHECK_FALSE(ray_max_density(ray, zero, step).has_value());
    }

    TEST_CASE("ray maximum dominates a 10x finer traversal")
    {
        oracle::Random rng(3);
        const GridBox g = oracle::cube_grid(0, 1, 17);
        const DensityField f = random_field(g, rng);
        const double step = default_ray_step(g);
        for (int t = 0; t < 200; ++t) {
            const Vec3 o = rng.in_box({-0.5, -0.5, 1.2}, {1.5, 1.5, 1.8});
            const Vec3 target = rng.in_box({0.1, 0.1, 0.1}, {0.9, 0.9, 0.9});
            const Ray ray{o, normalize(target - o)};
            const auto poi = ray_max_density(ray, f, step);
            REQUIRE(poi.has_value());
            const double best = sample_density(f, *poi);
            for (double s = 0; s < 4.0; s += step / 10)
                REQUIRE(sample_density(f, o + ray.direction * s) <= best + 1e-6);
        }
    }

    TEST_CASE("accumulation jump on slabs")
    {
        const GridBox g = oracle::cube_grid(0, 1, 41);
        const double step = default_ray_step(g);
        const DensityField slab =
            oracle::make_field(g, [](const Vec3& p) { return p.z >= 0.4 && p.z <= 0.6 ? 5.0 : 0.0; });
        const Ray down{{0.5, 0.5, 1.5}, {0, 0, -1}};
        const auto pick = ray_accumulated_jump(down, slab, step);
        REQUIRE(pick.has_value());
        // Far boundary of the slab seen from above is z = 0.4.
        CHECK(std::abs(pick->z - 0.4) <= 2 * step);

        const DensityField two = oracle::make_field(g, [](const Vec3& p) {
            if (p.z >= 0.7 && p.z <= 0.8)
                return 8.0;
            if (p.z >= 0.2 && p.z <= 0.3)
                return 3.0;
            return 0.0;
        });
        const auto first = ray_accumulated_jump(down, two, step);
        REQUIRE(first.has_value());
        CHECK(first->z > 0.65);
        CHECK(std::abs(first->z - 0.7) <= 2 * step);

        const DensityField zero = oracle::make_field(g, [](const Vec3&) { return 0.0; });
        CHECK_FALSE(ray_accumulated_jump(down, zero, step).has_value());
        CHECK_FALSE(ray_accumulated_jump({{3, 3, 3}, {0, 0, 1}}, slab, step).has_value());
    }

    TEST_CASE("lasso construction")
    {
        const SurfaceGeometry s;
        const Lasso rect = lasso_from_surface_samples({{-0.1, -0.1, 0}, {0.1, -0.1, 0}, {0.1, 0.1, 0}, {-0.1, 0.1, 0}}, s);
        CHECK(rect.vertices.size() == 4);
        CHECK(lasso_contains(rect, {0, 0}));
        CHECK_FALSE(lasso_contains(rect, {0.2, 0}));
        CHECK_THROWS_AS(lasso_from_surface_samples({{0, 0, 0}, {0.1, 0, 0}, {0, 0, 0}}, s), Error);
        const Lasso line = lasso_from_surface_samples({{0, 0, 0}, {0.1, 0, 0}, {0.2, 0, 0}}, s);
        CHECK_FALSE(lasso_contains(line, {0.1, 0}));
        CHECK_FALSE(lasso_contains(line, {0.1, 0.01}));
    }

    TEST_CASE("self-intersecting lasso follows the even-odd rule")
    {
        oracle::Random rng(4);
        for (int t = 0; t < 50; ++t) {
            Lasso l;
            const int n = rng.integer(3, 12);
            for (int i = 0; i < n; ++i)
                l.vertices.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
            for (int q = 0; q < 200; ++q) {
                const Vec2 p{rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2)};
                REQUIRE(lasso_contains(l, p) == oracle::even_odd(l.vertices, p));
            }
        }
    }

    TEST_CASE("full-surface lasso covers the below-plane view frustum")
    {
        Stage s;
        const double hw = s.surface.width / 2, hh = s.surface.height / 2;
        const Lasso full{{{-hw, -hh}, {hw, -hh}, {hw, hh}, {-hw, hh}}, true};
        const NodeMask m = lasso_frustum_mask(full, s.cam, s.surface, s.grid, HalfSpace::BelowOnly);
        std::size_t checked = 0;
        for (std::size_t i = 0; i < m.bits.size(); ++i) {
            const Vec3 p = s.grid.node_position(i);
            if (signed_distance(p, s.surface) > 0) {
                REQUIRE_FALSE(m.test(i));
                continue;
            }
            const Vec2 ndc = oracle::fishtank_ndc(p, s.head.position, s.surface);
            if (std::abs(std::abs(ndc.x) - 1) < 1e-9 || std::abs(std::abs(ndc.y) - 1) < 1e-9)
                continue;
            REQUIRE(m.test(i) == (std::abs(ndc.x) < 1 && std::abs(ndc.y) < 1));
            ++checked;
        }
        CHECK(checked > 1000);
    }

    TEST_CASE("tiny lasso around one projected node")
    {
        Stage s;
        const std::size_t target = s.grid.index(7, 15, 9);
        const Vec2 ndc = oracle::fishtank_ndc(s.grid.node_position(target), s.head.position, s.surface);
        const Vec2 c{ndc.x * s.surface.width / 2, ndc.y * s.surface.height / 2};
        const double e = 1e-7;
        const Lasso tiny{{{c.x - e, c.y - e}, {c.x + e, c.y - e}, {c.x + e, c.y + e}, {c.x - e, c.y + e}}, true};
        const NodeMask m = lasso_frustum_mask(tiny, s.cam, s.surface, s.grid, HalfSpace::All);
        CHECK(m.test(target));
        for (std::size_t i = 0; i < m.bits.size(); ++i) {
            const Vec3 p = s.grid.node_position(i);
            const Vec2 q = oracle::fishtank_ndc(p, s.head.position, s.surface);
            const Vec2 uv{q.x * s.surface.width / 2, q.y * s.surface.height / 2};
            REQUIRE(m.test(i) == oracle::even_odd(tiny.vertices, uv));
        }
    }

    TEST_CASE("lasso outside the surface selects nothing")
    {
        Stage s;
        const Lasso far{{{5, 5}, {6, 5}, {6, 6}}, true};
        CHECK(lasso_frustum_mask(far, s.cam, s.surface, s.grid, HalfSpace::All).none());
    }

    TEST_CASE("point membership equals brute force")
    {
        oracle::Random rng(5);
        const GridBox g = oracle::cube_grid(0, 1, 10);
        const DensityField f = random_field(g, rng);
        const NodeMask region = random_mask(g, rng, 0.4);
        const double rho0 = threshold_mean_density(f, region);
        std::vector<Vec3> pts;
        for (int i = 0; i < 3000; ++i)
            pts.push_back(rng.in_box({-0.1, -0.1, -0.1}, {1.1, 1.1, 1.1}));
        pts.push_back(g.node_position(3, 3, 3));
        const auto got = points_in_selection(pts, f, region, rho0);
        std::vector<std::uint32_t> want;
        const double h = 1.0 / 9.0;
        for (std::size_t p = 0; p < pts.size(); ++p) {
            const Vec3 x = pts[p];
            if (x.x < 0 || x.y < 0 || x.z < 0 || x.x > 1 || x.y > 1 || x.z > 1)
                continue;
            const int i = std::min(8, int(x.x / h)), j = std::min(8, int(x.y / h)), k = std::min(8, int(x.z / h));
            bool touches = false;
            for (int c = 0; c < 8; ++c) {
                const std::size_t n = g.index(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                touches = touches || (region.test(n) && f.values[n] > rho0);
            }
            if (touches && oracle::trilinear(f, x) > rho0)
                want.push_back(static_cast<std::uint32_t>(p));
        }
        CHECK(got == want);
        CHECK(std::is_sorted(got.begin(), got.end()));
    }

    TEST_CASE("brush through one of two clusters")
    {
        const LabeledCloud lc = gen_clusters(2, 2000, 0.05, 1.5, 17, {0.0, 0.0, 0.0});
        const GridBox g = compute_bounds(lc.cloud, 0.05, {48, 48, 48});
        const DensityField f = estimate_density_mbe(lc.cloud, g, {});
        const Vec3 c0 = lc.centers[0];
        const SelectionResult r = brush_select({c0 - Vec3{0.05, 0, 0}, c0 + Vec3{0.05, 0, 0}}, f, 0.6, lc.cloud.positions);
        const Metrics own = score(r.points, 0, lc);
        const Metrics other = score(r.points, 1, lc);
        CHECK(own.recall >= 0.9);
        CHECK(other.recall < 0.1);
        const SelectionResult again =
            brush_select({c0 - Vec3{0.05, 0, 0}, c0 + Vec3{0.05, 0, 0}}, f, 0.6, lc.cloud.positions);
        CHECK(again.points == r.points);
        CHECK(again.volume == r.volume);
        CHECK(again.rho0 == r.rho0);
    }

    TEST_CASE("selection invariants")
    {
        const LabeledCloud lc = gen_clusters(2, 1000, 0.05, 0.5, 3, {0.3, 0.3, 0.3});
        const GridBox g = compute_bounds(lc.cloud, 0.05, {32, 32, 32});
        const DensityField f = estimate_density_mbe(lc.cloud, g, {});
        const SelectionResult r = brush_select({lc.centers[0], lc.centers[1]}, f, 0.15, lc.cloud.positions);
        for (std::size_t i = 0; i < r.volume.bits.size(); ++i)
            if (r.volume.test(i)) {
                REQUIRE(r.region.test(i));
                REQUIRE(f.values[i] > r.rho0);
            }
        for (auto p : r.points)
            REQUIRE(sample_density(f, lc.cloud.positions[p]) > r.rho0);
        CHECK(r.diagnostics.region_nodes == r.region.count());
        CHECK(r.diagnostics.volume_nodes == r.volume.count());
    }

    TEST_CASE("uniform field selects nothing")
    {
        Stage s;
        const DensityField u = oracle::make_field(s.grid, [](const Vec3&) { return 2.0; });
        CHECK(brush_select({{0.5, 0.5, 0.5}}, u, 0.3).volume.none());
        const double hw = s.surface.width / 2, hh = s.surface.height / 2;
        const Lasso full{{{-hw, -hh}, {hw, -hh}, {hw, hh}, {-hw, hh}}, true};
        const SelectionResult r = cloud_lasso(full, u, s.cam, s.surface);
        CHECK(r.volume.none());
        CHECK(r.mesh.empty());
    }

    TEST_CASE("brush-wyp reductions and composition")
    {
        Stage s;
        oracle::Random rng(6);
        const DensityField f = oracle::make_field(s.grid, [](const Vec3& p) {
            return std::exp(-norm2(p - Vec3{0.5, 0.5, 0.4}) / 0.03) + 0.5 * std::exp(-norm2(p - Vec3{0.3, 0.6, 0.7}) / 0.01);
        });
        std::vector<Vec3> air{{0.5, 0.5, 1.2}, {0.55, 0.5, 1.1}, {0.6, 0.52, 1.05}};
        const SelectionResult a = brush_wyp(air_only(air), f, s.head, s.surface, 0.1);
        const SelectionResult b = brush_select(air, f, 0.1);
        CHECK(a.volume == b.volume);
        CHECK(a.region == b.region);

        SegmentedTrace mixed;
        mixed.air_samples = air;
        mixed.surface_samples = {{0.4, 0.5, 1.0}, {0.45, 0.55, 1.0}, {0.5, 0.6, 1.0}};
        mixed.segments = {{Space::Air, 0, 2}, {Space::Surface, 0, 3}, {Space::Air, 2, 1}};
        const SelectionResult m = brush_wyp(mixed, f, s.head, s.surface, 0.08);
        std::vector<Vec3> path{air[0], air[1]};
        for (const auto& q : mixed.surface_samples)
            path.push_back(*ray_max_density(surface_ray(q, s.head), f, default_ray_step(s.grid)));
        path.push_back(air[2]);
        const SelectionResult ref = brush_select(path, f, 0.08);
        CHECK(m.diagnostics.path == path);
        CHECK(m.region == ref.region);
        CHECK(m.volume == ref.volume);
    }

    TEST_CASE("brush-wyp POIs follow a filament below the surface")
    {
        Stage s;
        oracle::Random rng(7);
        PointCloud c;
        const Vec3 a{0.25, 0.45, 0.4}, b{0.75, 0.6, 0.45};
        for (int i = 0; i < 3000; ++i) {
            const double t = rng.uniform();
            c.positions.push_back(a + (b - a) * t + rng.unit() * (0.01 * rng.uniform()));
        }
        // A pilot width of two cells keeps the thin filament resolved on this coarse grid.
        KdeParams kde;
        kde.pilot_bandwidth = 2.0 * s.grid.min_cell_edge();
        const DensityField f = estimate_density_mbe(c, s.grid, kde);
        std::vector<Vec3> taps;
        for (int i = 0; i <= 20; ++i) {
            const Vec3 q = a + (b - a) * (0.05 + 0.9 * i / 20.0);
            taps.push_back(project_onto_plane(s.head.position + (q - s.head.position) *
                                                                    ((1.0 - s.head.position.z) / (q.z - s.head.position.z)),
                                              s.surface));
        }
        const SelectionResult r = brush_wyp(surface_only(taps), f, s.head, s.surface, 0.05);
        REQUIRE(r.diagnostics.path.size() == taps.size());
        const double cell = s.grid.min_cell_edge();
        for (const auto& p : r.diagnostics.path)
            REQUIRE(oracle::segment_distance(p, a, b) <= 2 * cell);
    }

    TEST_CASE("brush-lasso reductions")
    {
        Stage s;
        // The box reaches above the surface so that air strokes find nodes.
        GridBox tall;
        tall.min = {0, 0, 0};
        tall.max = {1, 1, 1.25};
        tall.resolution = {25, 25, 31};
        const DensityField f = oracle::make_field(tall, [](const Vec3& p) {
            return std::exp(-norm2(p - Vec3{0.5, 0.5, 0.5}) / 0.02) + 0.3 * std::exp(-norm2(p - Vec3{0.5, 0.5, 1.2}) / 0.02);
        });
        const std::vector<Vec3> air{{0.4, 0.5, 1.05}, {0.6, 0.5, 1.1}};
        const SelectionResult a = brush_lasso(air_only(air), f, s.head, s.surface, s.cam, 0.2);
        const SelectionResult ref = finalize_selection("brush", f, clip_mask_above(brush_voi(air, 0.2, tall), s.surface), {});
        CHECK_FALSE(a.volume.none());
        CHECK(a.region == ref.region);
        CHECK(a.volume == ref.volume);

        const std::vector<Vec3> ring{{0.3, 0.3, 1}, {0.7, 0.3, 1}, {0.7, 0.7, 1}, {0.3, 0.7, 1}};
        const SelectionResult b = brush_lasso(surface_only(ring), f, s.head, s.surface, s.cam, 0.2);
        const SelectionResult c =
            cloud_lasso(lasso_from_surface_samples(ring, s.surface), f, s.cam, s.surface, HalfSpace::BelowOnly);
        CHECK(b.region == c.region);
        CHECK(b.volume == c.volume);
        CHECK(b.rho0 == c.rho0);

        // Two surface taps make no lasso and no air means no region.
        CHECK_THROWS_AS(brush_lasso(surface_only({{0.5, 0.5, 1}, {0.6, 0.5, 1}}), f, s.head, s.surface, s.cam, 0.2),
                        Error);
    }

    TEST_CASE("cloud lasso errors on an empty frustum")
    {
        Stage s;
        const DensityField f = oracle::make_field(s.grid, [](const Vec3&) { return 1.0; });
        try {
            cloud_lasso({{{5, 5}, {6, 5}, {6, 6}}, true}, f, s.cam, s.surface);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::EmptyRegion);
        }
    }

    TEST_CASE("subtraction laws")
    {
        oracle::Random rng(8);
        const GridBox g = oracle::cube_grid(0, 1, 16);
        const DensityField f = random_field(g, rng);
        const SelectionResult A = finalize_selection("x", f, random_mask(g, rng, 0.5), {});
        const SelectionResult B = finalize_selection("x", f, random_mask(g, rng, 0.5), {});
        CHECK(subtract(f, A, A).volume.none());
        SelectionResult empty;
        empty.region = NodeMask(g);
        empty.volume = NodeMask(g);
        const SelectionResult same = subtract(f, A, empty);
        CHECK(same.volume == A.volume);
        CHECK(same.rho0 == A.rho0);
        const SelectionResult d1 = subtract(f, A, B);
        const SelectionResult d2 = subtract(f, d1, B);
        CHECK(d2.volume == d1.volume);
        CHECK(d2.points == d1.points);
        for (std::size_t i = 0; i < g.node_count(); ++i)
            REQUIRE(d1.volume.test(i) == (A.volume.test(i) && !B.volume.test(i)));
        SelectionResult other = B;
        other.volume = NodeMask(oracle::cube_grid(0, 1, 8));
        CHECK_THROWS_AS(subtract(f, A, other), Error);
    }

    TEST_CASE("point list subtraction")
    {
        const GridBox g = oracle::cube_grid(0, 1, 4);
        const DensityField f = oracle::make_field(g, [](const Vec3&) { return 1.0; });
        SelectionResult a, b;
        a.region = a.volume = b.region = b.volume = NodeMask(g);
        a.points = {1, 2, 3, 7};
        b.points = {2, 7, 9};
        CHECK(subtract(f, a, b).points == std::vector<std::uint32_t>{1, 3});
    }
}
