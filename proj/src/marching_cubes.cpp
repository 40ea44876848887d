#include "xrsel/marching_cubes.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <unordered_map>

namespace xrsel {

namespace {

using CaseTable = std::array<std::vector<std::array<int, 3>>, 256>;

int edge_between(int a, int b)
{
    for (int e = 0; e < 12; ++e) {
        const auto& ed = kCubeEdges[static_cast<std::size_t>(e)];
        if ((ed[0] == a && ed[1] == b) || (ed[0] == b && ed[1] == a))
            return e;
    }
    throw std::logic_error("corners do not share a cube edge");
}

bool edges_share_face(int e1, int e2)
{
    const auto& a = kCubeEdges[static_cast<std::size_t>(e1)];
    const auto& b = kCubeEdges[static_cast<std::size_t>(e2)];
    for (int axis = 0; axis < 3; ++axis) {
        const int bit = 1 << axis;
        const int side = a[0] & bit;
        if ((a[1] & bit) == side && (b[0] & bit) == side && (b[1] & bit) == side)
            return true;
    }
    return false;
}

bool loop_neighbors(const std::vector<int>& loop, int e1, int e2)
{
    const std::size_t n = loop.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (loop[i] == e1 && (loop[(i + 1) % n] == e2 || loop[(i + n - 1) % n] == e2))
            return true;
    }
    return false;
}

// Triangulates `poly` (a sub-polygon of `loop`, same winding) so that every
// diagonal crosses the cell interior. A diagonal between two edges of one face
// would lie in that face and could collide with the neighbouring cell's mesh.
bool triangulate_loop(const std::vector<int>& loop, const std::vector<int>& poly,
                      std::vector<std::array<int, 3>>& tris)
{
    const std::size_t n = poly.size();
    if (n < 3)
        return true;
    const auto allowed = [&](int a, int b) { return loop_neighbors(loop, a, b) || !edges_share_face(a, b); };
    for (std::size_t k = 2; k < n; ++k) {
        if (!allowed(poly[1], poly[k]) || !allowed(poly[k], poly[0]))
            continue;
        const std::size_t mark = tris.size();
        tris.push_back({poly[0], poly[1], poly[k]});
        const std::vector<int> left(poly.begin() + 1, poly.begin() + static_cast<std::ptrdiff_t>(k) + 1);
        std::vector<int> right(poly.begin() + static_cast<std::ptrdiff_t>(k), poly.end());
        right.push_back(poly[0]);
        if (triangulate_loop(loop, left, tris) && triangulate_loop(loop, right, tris))
            return true;
        tris.resize(mark);
    }
    return false;
}

// The case table is derived instead of transcribed. Each cube face contributes
// segments between its crossed edges, oriented so that the inside corners lie
// to the right when the face is seen from outside the cube; on ambiguous faces
// every inside corner is cut off separately. Adjacent cells see identical
// face configurations, so shared faces always get the same segments. Chaining
// the segments yields closed loops, triangulated by triangulate_loop.
CaseTable build_case_table()
{
    CaseTable table;
    for (int config = 0; config < 256; ++config) {
        const auto inside = [&](int corner) { return ((config >> corner) & 1) != 0; };
        std::array<int, 12> next;
        next.fill(-1);

        for (int axis = 0; axis < 3; ++axis) {
            for (int side = 0; side < 2; ++side) {
                const int b = (axis + 1) % 3;
                const int c = (axis + 2) % 3;
                // (u, v) right-handed about the outward normal.
                const int u_axis = side == 1 ? b : c;
                const int v_axis = side == 1 ? c : b;
                // Face corners in counter-clockwise order: (0,0) (1,0) (1,1) (0,1).
                std::array<int, 4> ring{};
                const int uv[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
                for (int q = 0; q < 4; ++q)
                    ring[q] = (side << axis) | (uv[q][0] << u_axis) | (uv[q][1] << v_axis);

                const auto pos2 = [&](int corner) {
                    return Vec2{static_cast<double>((corner >> u_axis) & 1),
                                static_cast<double>((corner >> v_axis) & 1)};
                };
                const auto mid2 = [&](int e) {
                    const auto& ed = kCubeEdges[static_cast<std::size_t>(e)];
                    return (pos2(ed[0]) + pos2(ed[1])) * 0.5;
                };
                const auto add_segment = [&](int e1, int e2, int inside_corner) {
                    const Vec2 p = mid2(e1);
                    const Vec2 q = mid2(e2);
                    const Vec2 ci = pos2(inside_corner);
                    if (cross(q - p, ci - p) < 0.0)
                        next[static_cast<std::size_t>(e1)] = e2;
                    else
                        next[static_cast<std::size_t>(e2)] = e1;
                };

                int n_inside = 0;
                for (int q = 0; q < 4; ++q)
                    n_inside += inside(ring[q]) ? 1 : 0;
                if (n_inside == 0 || n_inside == 4)
                    continue;

                const bool ambiguous = n_inside == 2 && inside(ring[0]) == inside(ring[2]);
                if (ambiguous) {
                    for (int q = 0; q < 4; ++q) {
                        if (!inside(ring[q]))
                            continue;
                        const int prev = ring[(q + 3) % 4];
                        const int nxt = ring[(q + 1) % 4];
                        add_segment(edge_between(ring[q], prev), edge_between(ring[q], nxt), ring[q]);
                    }
                    continue;
                }
                std::vector<int> crossed;
                int some_inside = -1;
                for (int q = 0; q < 4; ++q) {
                    const int a = ring[q];
                    const int bq = ring[(q + 1) % 4];
                    if (inside(a) != inside(bq))
                        crossed.push_back(edge_between(a, bq));
                    if (inside(a))
                        some_inside = a;
                }
                add_segment(crossed[0], crossed[1], some_inside);
            }
        }

        std::array<bool, 12> used{};
        for (int start = 0; start < 12; ++start) {
            if (next[static_cast<std::size_t>(start)] < 0 || used[static_cast<std::size_t>(start)])
                continue;
            std::vector<int> loop;
            int e = start;
            while (!used[static_cast<std::size_t>(e)]) {
                used[static_cast<std::size_t>(e)] = true;
                loop.push_back(e);
                e = next[static_cast<std::size_t>(e)];
                if (e < 0)
                    throw std::logic_error("marching cubes loop is not closed");
            }
            std::vector<std::array<int, 3>> tris;
            if (!triangulate_loop(loop, loop, tris))
                throw std::logic_error("marching cubes loop has no face-free triangulation");
            auto& out = table[static_cast<std::size_t>(config)];
            out.insert(out.end(), tris.begin(), tris.end());
        }
    }
    return table;
}

const CaseTable& case_table()
{
    static const CaseTable table = build_case_table();
    return table;
}

}  // namespace

const std::vector<std::array<int, 3>>& marching_cubes_case(int config)
{
    return case_table().at(static_cast<std::size_t>(config));
}

TriangleMesh marching_cubes(const DensityField& field, double rho0, const NodeMask& mask)
{
    TriangleMesh mesh;
    if (!std::isfinite(rho0))
        return mesh;
    const GridBox& g = field.grid;
    const int nx = g.resolution[0];
    const int ny = g.resolution[1];
    const int nz = g.resolution[2];
    const Vec3 step = g.cell_size();
    const auto& table = case_table();

    // Key: node index of the lower edge endpoint * 3 + axis.
    std::unordered_map<std::uint64_t, std::uint32_t> edge_vertex;
    const auto vertex_for = [&](int i, int j, int k, int corner_a, int corner_b) -> std::uint32_t {
        const int ai = i + (corner_a & 1), aj = j + ((corner_a >> 1) & 1), ak = k + ((corner_a >> 2) & 1);
        const int bi = i + (corner_b & 1), bj = j + ((corner_b >> 1) & 1), bk = k + ((corner_b >> 2) & 1);
        const int axis = ai != bi ? 0 : (aj != bj ? 1 : 2);
        const std::uint64_t key = static_cast<std::uint64_t>(g.index(ai, aj, ak)) * 3 + axis;
        const auto it = edge_vertex.find(key);
        if (it != edge_vertex.end())
            return it->second;
        const double va = field.at(ai, aj, ak);
        const double vb = field.at(bi, bj, bk);
        const double t = (rho0 - va) / (vb - va);
        const Vec3 pa = g.node_position(ai, aj, ak);
        const Vec3 pb = g.node_position(bi, bj, bk);
        const auto id = static_cast<std::uint32_t>(mesh.vertices.size());
        mesh.vertices.push_back(pa + (pb - pa) * t);
        edge_vertex.emplace(key, id);
        return id;
    };

    const double min_area2 = std::pow(1e-9 * std::min({step.x, step.y, step.z}), 4);
    for (int k = 0; k + 1 < nz; ++k) {
        for (int j = 0; j + 1 < ny; ++j) {
            for (int i = 0; i + 1 < nx; ++i) {
                int config = 0;
                bool touches_mask = false;
                for (int c = 0; c < 8; ++c) {
                    const std::size_t idx = g.index(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                    touches_mask = touches_mask || mask.test(idx);
                    if (static_cast<double>(field.values[idx]) > rho0)
                        config |= 1 << c;
                }
                if (!touches_mask || config == 0 || config == 255)
                    continue;
                for (const auto& tri : table[static_cast<std::size_t>(config)]) {
                    std::array<std::uint32_t, 3> ids{};
                    for (int v = 0; v < 3; ++v) {
                        const auto& ed = kCubeEdges[static_cast<std::size_t>(tri[static_cast<std::size_t>(v)])];
                        ids[static_cast<std::size_t>(v)] = vertex_for(i, j, k, ed[0], ed[1]);
                    }
                    const Vec3 n = cross(mesh.vertices[ids[1]] - mesh.vertices[ids[0]],
                                         mesh.vertices[ids[2]] - mesh.vertices[ids[0]]);
                    if (norm2(n) <= min_area2)
                        continue;
                    mesh.triangles.push_back(ids);
                }
            }
        }
    }

    // Drop vertices only referenced by skipped degenerate triangles.
    std::vector<std::int64_t> remap(mesh.vertices.size(), -1);
    std::vector<Vec3> kept;
    for (auto& tri : mesh.triangles) {
        for (auto& id : tri) {
            if (remap[id] < 0) {
                remap[id] = static_cast<std::int64_t>(kept.size());
                kept.push_back(mesh.vertices[id]);
            }
            id = static_cast<std::uint32_t>(remap[id]);
        }
    }
    mesh.vertices = std::move(kept);
    return mesh;
}

}  // namespace xrsel
