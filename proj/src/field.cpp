#include "xrsel/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "binary_io.hpp"
#include "xrsel/error.hpp"

namespace xrsel {

namespace {

constexpr char kFieldMagic[4] = {'X', 'R', 'D', 'F'};
constexpr std::uint32_t kFieldVersion = 1;

}  // namespace

double GridBox::min_cell_edge() const
{
    const Vec3 c = cell_size();
    return std::min({c.x, c.y, c.z});
}

std::array<int, 3> GridBox::coords(std::size_t index) const
{
    const auto nx = static_cast<std::size_t>(resolution[0]);
    const auto ny = static_cast<std::size_t>(resolution[1]);
    return {static_cast<int>(index % nx), static_cast<int>((index / nx) % ny),
            static_cast<int>(index / (nx * ny))};
}

Vec3 GridBox::node_position(int i, int j, int k) const
{
    const Vec3 step = cell_size();
    return {min.x + i * step.x, min.y + j * step.y, min.z + k * step.z};
}

bool GridBox::contains(const Vec3& p) const
{
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z &&
           p.z <= max.z;
}

void validate_grid(const GridBox& grid)
{
    if (!is_finite(grid.min) || !is_finite(grid.max))
        throw Error(ErrorKind::Validation, "grid box has non-finite bounds");
    if (!(grid.max.x > grid.min.x && grid.max.y > grid.min.y && grid.max.z > grid.min.z))
        throw Error(ErrorKind::Validation, "grid box max must exceed min on every axis");
    for (int n : grid.resolution) {
        if (n < 2)
            throw Error(ErrorKind::Validation, "grid resolution must be at least 2 per axis");
    }
}

GridBox compute_bounds(const PointCloud& cloud, double padding_fraction, std::array<int, 3> resolution)
{
    if (cloud.empty())
        throw Error(ErrorKind::Degenerate, "cannot bound an empty point cloud");
    if (!(padding_fraction >= 0.0) || !std::isfinite(padding_fraction))
        throw Error(ErrorKind::Parameter, "padding fraction must be non-negative");
    Vec3 lo = cloud.positions.front();
    Vec3 hi = lo;
    for (const auto& p : cloud.positions) {
        for (std::size_t a = 0; a < 3; ++a) {
            lo[a] = std::min(lo[a], p[a]);
            hi[a] = std::max(hi[a], p[a]);
        }
    }
    const double diag = norm(hi - lo);
    if (!(diag > 0.0))
        throw Error(ErrorKind::Degenerate, "point cloud has a degenerate (zero-size) bounding box");
    const double pad = padding_fraction * diag;
    GridBox grid;
    grid.min = lo - Vec3{pad, pad, pad};
    grid.max = hi + Vec3{pad, pad, pad};
    grid.resolution = resolution;
    if (!(grid.max.x > grid.min.x && grid.max.y > grid.min.y && grid.max.z > grid.min.z))
        throw Error(ErrorKind::Degenerate, "point cloud is flat along an axis; use a positive padding");
    validate_grid(grid);
    return grid;
}

double sample_density(const DensityField& field, const Vec3& point)
{
    const GridBox& g = field.grid;
    if (!g.contains(point))
        return 0.0;
    const Vec3 step = g.cell_size();
    int idx[3];
    double t[3];
    for (std::size_t a = 0; a < 3; ++a) {
        const double f = (point[a] - g.min[a]) / step[a];
        int i = static_cast<int>(std::floor(f));
        i = std::clamp(i, 0, g.resolution[a] - 2);
        idx[a] = i;
        t[a] = std::clamp(f - i, 0.0, 1.0);
    }
    const auto v = [&](int di, int dj, int dk) {
        return static_cast<double>(field.at(idx[0] + di, idx[1] + dj, idx[2] + dk));
    };
    const double c00 = v(0, 0, 0) * (1 - t[0]) + v(1, 0, 0) * t[0];
    const double c10 = v(0, 1, 0) * (1 - t[0]) + v(1, 1, 0) * t[0];
    const double c01 = v(0, 0, 1) * (1 - t[0]) + v(1, 0, 1) * t[0];
    const double c11 = v(0, 1, 1) * (1 - t[0]) + v(1, 1, 1) * t[0];
    const double c0 = c00 * (1 - t[1]) + c10 * t[1];
    const double c1 = c01 * (1 - t[1]) + c11 * t[1];
    return c0 * (1 - t[2]) + c1 * t[2];
}

double integrate_mass(const DensityField& field)
{
    const GridBox& g = field.grid;
    const Vec3 step = g.cell_size();
    const double cell_volume = step.x * step.y * step.z;
    const auto weight = [](int i, int n) { return (i == 0 || i == n - 1) ? 0.5 : 1.0; };
    double total = 0.0;
    for (int k = 0; k < g.resolution[2]; ++k) {
        for (int j = 0; j < g.resolution[1]; ++j) {
            const double wjk = weight(j, g.resolution[1]) * weight(k, g.resolution[2]);
            for (int i = 0; i < g.resolution[0]; ++i)
                total += wjk * weight(i, g.resolution[0]) * field.at(i, j, k);
        }
    }
    return total * cell_volume;
}

FieldStats field_stats(const DensityField& field)
{
    FieldStats s;
    if (!field.values.empty()) {
        const auto [lo, hi] = std::minmax_element(field.values.begin(), field.values.end());
        s.min = *lo;
        s.max = *hi;
    }
    s.mass = integrate_mass(field);
    return s;
}

std::vector<std::uint8_t> encode_field(const DensityField& field)
{
    validate_grid(field.grid);
    if (field.values.size() != field.grid.node_count())
        throw Error(ErrorKind::Validation, "field value count does not match the grid");
    std::vector<std::uint8_t> out(kFieldMagic, kFieldMagic + 4);
    out.reserve(4 + 4 + 48 + 12 + 4 * field.values.size());
    detail::put_le<std::uint32_t>(out, kFieldVersion);
    for (std::size_t a = 0; a < 3; ++a)
        detail::put_le(out, field.grid.min[a]);
    for (std::size_t a = 0; a < 3; ++a)
        detail::put_le(out, field.grid.max[a]);
    for (int n : field.grid.resolution)
        detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(n));
    for (float v : field.values)
        detail::put_le(out, v);
    return out;
}

DensityField decode_field(const std::vector<std::uint8_t>& bytes)
{
    detail::ByteReader in(bytes, "density field");
    if (in.get_string(4) != std::string(kFieldMagic, 4))
        throw Error(ErrorKind::Parse, "density field: bad magic");
    if (in.get<std::uint32_t>() != kFieldVersion)
        throw Error(ErrorKind::Parse, "density field: unsupported version");
    DensityField field;
    for (std::size_t a = 0; a < 3; ++a)
        field.grid.min[a] = in.get<double>();
    for (std::size_t a = 0; a < 3; ++a)
        field.grid.max[a] = in.get<double>();
    for (auto& n : field.grid.resolution) {
        const auto v = in.get<std::uint32_t>();
        if (v > static_cast<std::uint32_t>(std::numeric_limits<int>::max()))
            throw Error(ErrorKind::Parse, "density field: resolution out of range");
        n = static_cast<int>(v);
    }
    try {
        validate_grid(field.grid);
    } catch (const Error& e) {
        throw Error(ErrorKind::Parse, std::string("density field: ") + e.what());
    }
    const std::size_t count = field.grid.node_count();
    if (in.remaining() != count * sizeof(float))
        throw Error(ErrorKind::Parse, "density field: truncated file");
    field.values.resize(count);
    for (auto& v : field.values)
        v = in.get<float>();
    return field;
}

void save_field(const DensityField& field, const std::filesystem::path& path)
{
    detail::write_file_bytes(path.string(), encode_field(field));
}

DensityField load_field(const std::filesystem::path& path)
{
    return decode_field(detail::read_file_bytes(path.string()));
}

}  // namespace xrsel
