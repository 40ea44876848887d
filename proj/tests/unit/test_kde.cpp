#include <doctest.h>

#include "oracles.hpp"
#include "xrsel/error.hpp"
#include "xrsel/kde.hpp"
#include "xrsel/synth.hpp"

using namespace xrsel;

namespace {

PointCloud random_cloud(std::size_t n, std::uint64_t seed)
{
    oracle::Random rng(seed);
    PointCloud c;
    for (std::size_t i = 0; i < n; ++i) {
        // Two blobs of different density.
        const Vec3 center = i % 3 == 0 ? Vec3{0.7, 0.7, 0.7} : Vec3{0.3, 0.3, 0.3};
        const double s = i % 3 == 0 ? 0.12 : 0.05;
        c.positions.push_back(center + rng.unit() * (s * std::cbrt(rng.uniform())));
    }
    return c;
}

}  // namespace

TEST_SUITE("kde")
{
    TEST_CASE("normalization constant is the unit-ball integral of the profile")
    {
        // Integral of (1 - r^2) 4 pi r^2 dr over [0, 1] by a fine midpoint rule.
        double sum = 0;
        const int m = 200000;
        for (int i = 0; i < m; ++i) {
            const double r = (i + 0.5) / m;
            sum += (1 - r * r) * 4 * M_PI * r * r / m;
        }
        CHECK(kEpanechnikovNorm3 == doctest::Approx(sum).epsilon(1e-9));
    }

    TEST_CASE("mean nearest-neighbour distance matches brute force")
    {
        const PointCloud c = random_cloud(600, 1);
        double sum = 0;
        for (std::size_t i = 0; i < c.size(); ++i) {
            double best = 1e300;
            for (std::size_t j = 0; j < c.size(); ++j)
                if (j != i)
                    best = std::min(best, norm(c.positions[i] - c.positions[j]));
            sum += best;
        }
        CHECK(mean_nearest_neighbor_distance(c.positions) == doctest::Approx(sum / c.size()).epsilon(1e-12));
    }

    TEST_CASE("bandwidths match a brute-force pilot pass")
    {
        const PointCloud c = random_cloud(800, 2);
        const BandwidthSet bw = compute_bandwidths(c, {});
        CHECK(bw.pilot_bandwidth == doctest::Approx(2.0 * mean_nearest_neighbor_distance(c.positions)));
        const auto ref = oracle::brute_bandwidths(c.positions, bw.pilot_bandwidth, 0.5);
        for (std::size_t i = 0; i < c.size(); ++i) {
            REQUIRE(bw.pilot_density[i] == ref.pilot[i]);
            REQUIRE(bw.bandwidths[i] == ref.bandwidth[i]);
        }
    }

    TEST_CASE("grid values equal the brute-force sum at random nodes")
    {
        const PointCloud c = random_cloud(1500, 3);
        const GridBox g = compute_bounds(c, 0.05, {33, 33, 33});
        BandwidthSet bw;
        const DensityField f = estimate_density_mbe(c, g, {}, &bw);
        const auto ref = oracle::brute_bandwidths(c.positions, bw.pilot_bandwidth, 0.5);
        oracle::Random rng(3);
        for (int t = 0; t < 200; ++t) {
            const auto idx = static_cast<std::size_t>(rng.integer(0, static_cast<int>(g.node_count()) - 1));
            REQUIRE(f.values[idx] == oracle::brute_kde_at(c.positions, ref.bandwidth, g.node_position(idx)));
        }
        for (float v : f.values)
            REQUIRE(v >= 0.0f);
    }

    TEST_CASE("single-point support is finite")
    {
        PointCloud c;
        c.positions = {{0.5, 0.5, 0.5}};
        const GridBox g = oracle::cube_grid(0, 1, 21);
        BandwidthSet bw;
        bw.pilot_bandwidth = 0.2;
        bw.bandwidths = {0.2};
        const DensityField f = estimate_density_with(c, g, bw);
        float peak = 0;
        for (std::size_t i = 0; i < f.values.size(); ++i) {
            const double d = norm(g.node_position(i) - c.positions[0]);
            if (d >= 0.2)
                REQUIRE(f.values[i] == 0.0f);
            else
                REQUIRE(f.values[i] > 0.0f);
            peak = std::max(peak, f.values[i]);
        }
        CHECK(f.at(10, 10, 10) == peak);
    }

    TEST_CASE("mass is close to one for a well-padded cluster")
    {
        const LabeledCloud lc = gen_clusters(1, 3000, 0.05, 1.0, 5, {0.5, 0.5, 0.5});
        const GridBox g = compute_bounds(lc.cloud, 0.1, {64, 64, 64});
        const double coarse = integrate_mass(estimate_density_mbe(lc.cloud, g, {}));
        const GridBox fine_grid = compute_bounds(lc.cloud, 0.1, {127, 127, 127});
        const double fine = integrate_mass(estimate_density_mbe(lc.cloud, fine_grid, {}));
        CHECK(std::abs(coarse - 1.0) < 0.1);
        CHECK(std::abs(fine - 1.0) < 0.1);
        CHECK(std::abs(coarse - fine) < 0.1);
    }

    TEST_CASE("translation leaves the field unchanged")
    {
        PointCloud c = random_cloud(400, 6);
        // Power-of-two shift keeps every coordinate difference exact.
        const Vec3 shift{4.0, -8.0, 2.0};
        GridBox g = oracle::cube_grid(0, 1, 17);
        const DensityField a = estimate_density_mbe(c, g, {0.5, 0.1, 2.0});
        for (auto& p : c.positions)
            p += shift;
        g.min += shift;
        g.max += shift;
        const DensityField b = estimate_density_mbe(c, g, {0.5, 0.1, 2.0});
        double worst = 0;
        for (std::size_t i = 0; i < a.values.size(); ++i)
            worst = std::max(worst, std::abs(double(a.values[i]) - b.values[i]) / std::max(1.0, double(a.values[i])));
        CHECK(worst < 1e-5);
    }

    TEST_CASE("repeated estimates are bit-identical")
    {
        const PointCloud c = random_cloud(500, 7);
        const GridBox g = compute_bounds(c, 0.05, {24, 24, 24});
        CHECK(estimate_density_mbe(c, g, {}).values == estimate_density_mbe(c, g, {}).values);
    }

    TEST_CASE("parameter errors")
    {
        const PointCloud c = random_cloud(50, 8);
        const GridBox g = compute_bounds(c, 0.05, {8, 8, 8});
        CHECK_THROWS_AS(estimate_density_mbe(c, g, {1.5, 0.0, 2.0}), Error);
        CHECK_THROWS_AS(estimate_density_mbe(PointCloud{}, g, {}), Error);
        PointCloud same;
        same.positions = {{0, 0, 0}, {0, 0, 0}};
        CHECK_THROWS_AS(compute_bandwidths(same, {}), Error);
    }
}
