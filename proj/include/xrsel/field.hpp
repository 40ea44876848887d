#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "xrsel/cloud.hpp"
#include "xrsel/vec.hpp"

namespace xrsel {

inline constexpr int kDefaultResolution = 128;

/// Axis-aligned box B sampled by a regular node lattice. Nodes sit on both
/// faces of the box, so the cell edge along an axis is extent / (n - 1).
struct GridBox {
    Vec3 min;
    Vec3 max{1.0, 1.0, 1.0};
    std::array<int, 3> resolution{kDefaultResolution, kDefaultResolution, kDefaultResolution};

    std::size_t node_count() const
    {
        return static_cast<std::size_t>(resolution[0]) * resolution[1] * resolution[2];
    }
    Vec3 cell_size() const
    {
        return {(max.x - min.x) / (resolution[0] - 1), (max.y - min.y) / (resolution[1] - 1),
                (max.z - min.z) / (resolution[2] - 1)};
    }
    double min_cell_edge() const;
    double diagonal() const { return norm(max - min); }

    std::size_t index(int i, int j, int k) const
    {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(resolution[0]) *
                   (static_cast<std::size_t>(j) + static_cast<std::size_t>(resolution[1]) * k);
    }
    std::array<int, 3> coords(std::size_t index) const;
    Vec3 node_position(int i, int j, int k) const;
    Vec3 node_position(std::size_t index) const
    {
        const auto c = coords(index);
        return node_position(c[0], c[1], c[2]);
    }
    bool contains(const Vec3& p) const;

    friend bool operator==(const GridBox&, const GridBox&) = default;
};

void validate_grid(const GridBox& grid);

/// Node values of rho over a GridBox, x-fastest.
struct DensityField {
    GridBox grid;
    std::vector<float> values;

    float at(int i, int j, int k) const { return values[grid.index(i, j, k)]; }
};

/// Bounds expanded by `padding_fraction` of the diagonal on every side.
GridBox compute_bounds(const PointCloud& cloud, double padding_fraction,
                       std::array<int, 3> resolution = {kDefaultResolution, kDefaultResolution,
                                                        kDefaultResolution});

/// Trilinear interpolation inside B, 0 outside.
double sample_density(const DensityField& field, const Vec3& point);

/// Trapezoidal quadrature of the node values over B.
double integrate_mass(const DensityField& field);

struct FieldStats {
    double min = 0.0;
    double max = 0.0;
    double mass = 0.0;
};
FieldStats field_stats(const DensityField& field);

/// "XRDF" | u32 version=1 | f64 min[3] | f64 max[3] | u32 nx,ny,nz | f32 values.
/// Little-endian throughout.
void save_field(const DensityField& field, const std::filesystem::path& path);
DensityField load_field(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_field(const DensityField& field);
DensityField decode_field(const std::vector<std::uint8_t>& bytes);

}  // namespace xrsel
