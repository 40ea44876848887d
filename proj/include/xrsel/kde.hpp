#pragma once

#include <numbers>
#include <vector>

#include "xrsel/cloud.hpp"
#include "xrsel/field.hpp"

namespace xrsel {

/// Integral of (1 - |u|^2) over the unit ball.
inline constexpr double kEpanechnikovNorm3 = 8.0 * std::numbers::pi / 15.0;

struct KdeParams {
    double alpha = 0.5;             // bandwidth sensitivity
    double pilot_bandwidth = 0.0;   // h0; <= 0 selects nn_factor * mean NN distance
    double nn_factor = 2.0;
};

struct BandwidthSet {
    double pilot_bandwidth = 0.0;
    double alpha = 0.5;
    double geometric_mean = 0.0;
    std::vector<double> pilot_density;  // at each data point
    std::vector<double> bandwidths;     // lambda_i * h0
};

double mean_nearest_neighbor_distance(const std::vector<Vec3>& points);

/// Pilot pass: fixed-width Epanechnikov density at every data point and the
/// resulting per-point adaptive bandwidths.
BandwidthSet compute_bandwidths(const PointCloud& cloud, const KdeParams& params);

/// Modified-Breiman adaptive KDE evaluated on every node of `grid`. Node sums
/// run over points in ascending index order in double precision and are then
/// stored as f32, so results do not depend on scheduling.
DensityField estimate_density_mbe(const PointCloud& cloud, const GridBox& grid,
                                  const KdeParams& params, BandwidthSet* bandwidths_out = nullptr);

DensityField estimate_density_with(const PointCloud& cloud, const GridBox& grid,
                                   const BandwidthSet& bandwidths);

}  // namespace xrsel
