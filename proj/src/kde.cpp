#include "xrsel/kde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "xrsel/error.hpp"

namespace xrsel {

namespace {

// Uniform binning of points for fixed-radius and nearest-neighbor queries.
class PointBins {
public:
    PointBins(const std::vector<Vec3>& points, double cell) : points_(points), cell_(cell)
    {
        lo_ = points.front();
        Vec3 hi = lo_;
        for (const auto& p : points) {
            for (std::size_t a = 0; a < 3; ++a) {
                lo_[a] = std::min(lo_[a], p[a]);
                hi[a] = std::max(hi[a], p[a]);
            }
        }
        for (std::size_t a = 0; a < 3; ++a)
            dims_[a] = static_cast<long>(std::floor((hi[a] - lo_[a]) / cell_)) + 1;
        const std::size_t ncells = static_cast<std::size_t>(dims_[0] * dims_[1] * dims_[2]);
        start_.assign(ncells + 1, 0);
        std::vector<std::size_t> key(points.size());
        for (std::size_t i = 0; i < points.size(); ++i) {
            key[i] = flat(cell_of(points[i]));
            ++start_[key[i] + 1];
        }
        for (std::size_t c = 0; c < ncells; ++c)
            start_[c + 1] += start_[c];
        members_.resize(points.size());
        std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
        for (std::size_t i = 0; i < points.size(); ++i)
            members_[fill[key[i]]++] = static_cast<std::uint32_t>(i);
    }

    std::array<long, 3> cell_of(const Vec3& p) const
    {
        std::array<long, 3> c{};
        for (std::size_t a = 0; a < 3; ++a)
            c[a] = std::clamp(static_cast<long>(std::floor((p[a] - lo_[a]) / cell_)), 0L, dims_[a] - 1);
        return c;
    }

    template <typename Fn>
    void for_each_in_box(const std::array<long, 3>& lo, const std::array<long, 3>& hi, Fn&& fn) const
    {
        for (long z = std::max(lo[2], 0L); z <= std::min(hi[2], dims_[2] - 1); ++z)
            for (long y = std::max(lo[1], 0L); y <= std::min(hi[1], dims_[1] - 1); ++y)
                for (long x = std::max(lo[0], 0L); x <= std::min(hi[0], dims_[0] - 1); ++x) {
                    const std::size_t c = flat({x, y, z});
                    for (std::size_t m = start_[c]; m < start_[c + 1]; ++m)
                        fn(members_[m]);
                }
    }

    double nearest_distance(std::size_t self) const
    {
        const Vec3& p = points_[self];
        const auto c = cell_of(p);
        double best2 = std::numeric_limits<double>::infinity();
        const long max_ring = std::max({dims_[0], dims_[1], dims_[2]});
        for (long r = 0; r <= max_ring; ++r) {
            // Shell of cells at Chebyshev distance r.
            for (long z = c[2] - r; z <= c[2] + r; ++z)
                for (long y = c[1] - r; y <= c[1] + r; ++y)
                    for (long x = c[0] - r; x <= c[0] + r; ++x) {
                        if (std::max({std::abs(x - c[0]), std::abs(y - c[1]), std::abs(z - c[2])}) != r)
                            continue;
                        if (x < 0 || y < 0 || z < 0 || x >= dims_[0] || y >= dims_[1] || z >= dims_[2])
                            continue;
                        const std::size_t cell = flat({x, y, z});
                        for (std::size_t m = start_[cell]; m < start_[cell + 1]; ++m) {
                            if (members_[m] == self)
                                continue;
                            best2 = std::min(best2, norm2(points_[members_[m]] - p));
                        }
                    }
            const double reach = r * cell_;
            if (best2 <= reach * reach)
                break;
        }
        return std::sqrt(best2);
    }

private:
    std::size_t flat(const std::array<long, 3>& c) const
    {
        return static_cast<std::size_t>(c[0] + dims_[0] * (c[1] + dims_[1] * c[2]));
    }

    const std::vector<Vec3>& points_;
    double cell_;
    Vec3 lo_;
    std::array<long, 3> dims_{};
    std::vector<std::size_t> start_;
    std::vector<std::uint32_t> members_;
};

double bin_cell_for(const std::vector<Vec3>& points)
{
    Vec3 lo = points.front();
    Vec3 hi = lo;
    for (const auto& p : points) {
        for (std::size_t a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], p[a]);
            hi[a] = std::max(hi[a], p[a]);
        }
    }
    const Vec3 ext = hi - lo;
    const double diag = norm(ext);
    // Aim for a few points per occupied cell without exploding the cell count.
    double vol = 1.0;
    int dims = 0;
    for (std::size_t a = 0; a < 3; ++a) {
        if (ext[a] > 1e-12 * diag) {
            vol *= ext[a];
            ++dims;
        }
    }
    double cell = std::pow(vol * 4.0 / points.size(), 1.0 / std::max(dims, 1));
    return std::max(cell, diag / 256.0);
}

}  // namespace

double mean_nearest_neighbor_distance(const std::vector<Vec3>& points)
{
    if (points.size() < 2)
        throw Error(ErrorKind::Parameter, "nearest-neighbor distance needs at least two points");
    const double cell = bin_cell_for(points);
    if (!(cell > 0.0))
        throw Error(ErrorKind::Numeric, "all points coincide");
    PointBins bins(points, cell);
    double sum = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i)
        sum += bins.nearest_distance(i);
    return sum / static_cast<double>(points.size());
}

BandwidthSet compute_bandwidths(const PointCloud& cloud, const KdeParams& params)
{
    if (cloud.empty())
        throw Error(ErrorKind::Degenerate, "density estimation needs a non-empty cloud");
    validate_cloud(cloud);
    if (!(params.alpha >= 0.0 && params.alpha <= 1.0))
        throw Error(ErrorKind::Parameter, "alpha must lie in [0, 1]");

    BandwidthSet out;
    out.alpha = params.alpha;
    out.pilot_bandwidth = params.pilot_bandwidth;
    if (!(out.pilot_bandwidth > 0.0)) {
        if (!(params.nn_factor > 0.0))
            throw Error(ErrorKind::Parameter, "nn_factor must be positive");
        out.pilot_bandwidth = params.nn_factor * mean_nearest_neighbor_distance(cloud.positions);
    }
    const double h0 = out.pilot_bandwidth;
    if (!(h0 > 0.0) || !std::isfinite(h0))
        throw Error(ErrorKind::Numeric, "pilot bandwidth collapsed to zero");

    const auto& pts = cloud.positions;
    const double n = static_cast<double>(pts.size());
    const double h2 = h0 * h0;
    const double denom = n * h0 * h0 * h0 * kEpanechnikovNorm3;

    PointBins bins(pts, h0);
    out.pilot_density.resize(pts.size());
    std::vector<std::uint32_t> nbrs;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        nbrs.clear();
        auto c = bins.cell_of(pts[i]);
        bins.for_each_in_box({c[0] - 1, c[1] - 1, c[2] - 1}, {c[0] + 1, c[1] + 1, c[2] + 1},
                             [&](std::uint32_t j) { nbrs.push_back(j); });
        std::sort(nbrs.begin(), nbrs.end());
        double sum = 0.0;
        for (auto j : nbrs) {
            const double d2 = norm2(pts[j] - pts[i]);
            if (d2 < h2)
                sum += (1.0 - d2 / h2) / denom;
        }
        out.pilot_density[i] = sum;
    }

    double log_sum = 0.0;
    for (double p : out.pilot_density) {
        if (!(p > 0.0) || !std::isfinite(p))
            throw Error(ErrorKind::Numeric, "pilot density vanished at a data point");
        log_sum += std::log(p);
    }
    out.geometric_mean = std::exp(log_sum / n);
    out.bandwidths.resize(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double lambda = std::pow(out.pilot_density[i] / out.geometric_mean, -params.alpha);
        out.bandwidths[i] = lambda * h0;
        if (!(out.bandwidths[i] > 0.0) || !std::isfinite(out.bandwidths[i]))
            throw Error(ErrorKind::Numeric, "adaptive bandwidth is not finite");
    }
    return out;
}

DensityField estimate_density_with(const PointCloud& cloud, const GridBox& grid,
                                   const BandwidthSet& bw)
{
    validate_grid(grid);
    if (bw.bandwidths.size() != cloud.size())
        throw Error(ErrorKind::Parameter, "bandwidth count does not match the cloud");
    const auto& pts = cloud.positions;
    const double n = static_cast<double>(pts.size());
    const Vec3 step = grid.cell_size();
    const int nx = grid.resolution[0];
    const int ny = grid.resolution[1];
    const int nz = grid.resolution[2];

    DensityField field;
    field.grid = grid;
    field.values.assign(grid.node_count(), 0.0f);

    // Each z-slab owns its nodes, and within a slab points are visited in
    // ascending index order, so every node sum has a fixed order.
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < nz; ++k) {
        std::vector<double> acc(static_cast<std::size_t>(nx) * ny, 0.0);
        const double zk = grid.node_position(0, 0, k).z;
        for (std::size_t p = 0; p < pts.size(); ++p) {
            const Vec3& x = pts[p];
            const double h = bw.bandwidths[p];
            if (!(std::abs(zk - x.z) < h))
                continue;
            const int i0 = std::max(0, static_cast<int>(std::floor((x.x - h - grid.min.x) / step.x)));
            const int i1 = std::min(nx - 1, static_cast<int>(std::ceil((x.x + h - grid.min.x) / step.x)));
            const int j0 = std::max(0, static_cast<int>(std::floor((x.y - h - grid.min.y) / step.y)));
            const int j1 = std::min(ny - 1, static_cast<int>(std::ceil((x.y + h - grid.min.y) / step.y)));
            for (int j = j0; j <= j1; ++j) {
                for (int i = i0; i <= i1; ++i) {
                    const Vec3 q = grid.node_position(i, j, k);
                    const double d2 = norm2(q - x);
                    if (d2 < h * h)
                        acc[static_cast<std::size_t>(i) + static_cast<std::size_t>(nx) * j] +=
                            (1.0 - d2 / (h * h)) / (n * h * h * h * kEpanechnikovNorm3);
                }
            }
        }
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                field.values[grid.index(i, j, k)] =
                    static_cast<float>(acc[static_cast<std::size_t>(i) + static_cast<std::size_t>(nx) * j]);
    }

    for (float v : field.values) {
        if (!std::isfinite(v) || v < 0.0f)
            throw Error(ErrorKind::Numeric, "density estimate produced a non-finite value");
    }
    return field;
}

DensityField estimate_density_mbe(const PointCloud& cloud, const GridBox& grid, const KdeParams& params,
                                  BandwidthSet* bandwidths_out)
{
    validate_grid(grid);
    BandwidthSet bw = compute_bandwidths(cloud, params);
    DensityField field = estimate_density_with(cloud, grid, bw);
    if (bandwidths_out)
        *bandwidths_out = std::move(bw);
    return field;
}

}  // namespace xrsel
