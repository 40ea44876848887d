#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "xrsel/cloud.hpp"
#include "xrsel/geometry.hpp"
#include "xrsel/traces.hpp"

namespace xrsel {

/// Identifies the sampling scheme recorded in generated metadata: 64-bit
/// Mersenne Twister, uniforms from the top 53 bits, normals by Box-Muller.
inline constexpr const char* kRngAlgorithm = "mt19937_64/u53/box-muller";

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    Vec3 unit_vector();

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

struct Spine {
    int label = 0;
    std::vector<Vec3> points;
};

struct LabeledCloud {
    PointCloud cloud;
    std::vector<int> labels;
    std::string description;
    std::vector<Spine> spines;
    std::vector<Vec3> centers;  // cluster centers when applicable
};

struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double jaccard = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
};

/// Half-spherical shell (z >= 0 about `center`) with label 1 plus
/// `noise_n` uniform interferers inside the shell, label 0.
LabeledCloud gen_shell(std::size_t n, double radius, double thickness, std::size_t noise_n, std::uint64_t seed,
                       Vec3 center = {});

/// `k` Plummer spheres of scale radius `scale` with centers at least
/// `separation` apart, labels 0..k-1. The first cluster sits at `origin`.
LabeledCloud gen_clusters(std::size_t k, std::size_t per_cluster, double scale, double separation,
                          std::uint64_t seed, Vec3 origin = {});

/// Random polyline spines inside the unit cube, points Gaussian-scattered
/// around them with sigma = thickness, labels 0..segments-1.
LabeledCloud gen_filaments(std::size_t segments, std::size_t points_per_segment, double thickness,
                           std::uint64_t seed);

Metrics score(const std::vector<std::uint32_t>& selected, int truth_label, const LabeledCloud& labeled);
Metrics score_labels(const std::vector<std::uint32_t>& selected, int truth_label, const std::vector<int>& labels);

enum class TraceKind { LassoAroundCluster, BrushAlongFilament, MixedCrossSpace };

TraceKind parse_trace_kind(const std::string& name);
const char* to_string(TraceKind kind);

/// Machine-drawn stroke targeting the structure labelled `target`.
InputTrace gen_scripted_trace(TraceKind kind, const LabeledCloud& labeled, int target, const SurfaceGeometry& surface,
                              const HeadPose& head, std::uint64_t seed);

/// Where the line from the head through `point` meets the surface plane.
Vec3 central_projection(const Vec3& point, const HeadPose& head, const SurfaceGeometry& surface);

/// Convex hull (counter-clockwise) of 2D points.
std::vector<Vec2> convex_hull(std::vector<Vec2> points);

std::string format_labels_csv(const std::vector<int>& labels);
std::vector<int> parse_labels_csv(const std::string& text);

}  // namespace xrsel
