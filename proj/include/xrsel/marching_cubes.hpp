#pragma once

#include <array>
#include <vector>

#include "xrsel/field.hpp"
#include "xrsel/selection.hpp"

namespace xrsel {

/// Cube corner c sits at (c & 1, (c >> 1) & 1, (c >> 2) & 1).
/// Edges 0-3 run along x, 4-7 along y, 8-11 along z.
inline constexpr std::array<std::array<int, 2>, 12> kCubeEdges{{
    {0, 1}, {2, 3}, {4, 5}, {6, 7},
    {0, 2}, {1, 3}, {4, 6}, {5, 7},
    {0, 4}, {1, 5}, {2, 6}, {3, 7},
}};

/// Triangles (as cube-edge triples) for one of the 256 inside/outside corner
/// configurations; bit c of `config` set means corner c is above the iso
/// value. Triangles wind counter-clockwise seen from the low-value side.
const std::vector<std::array<int, 3>>& marching_cubes_case(int config);

/// Iso-surface at rho0 over every cell with at least one corner in `mask`.
TriangleMesh marching_cubes(const DensityField& field, double rho0, const NodeMask& mask);

}  // namespace xrsel
