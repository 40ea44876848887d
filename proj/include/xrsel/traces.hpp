#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xrsel/geometry.hpp"
#include "xrsel/vec.hpp"

namespace xrsel {

enum class InputSource { Pen, Touch, Hand };
enum class Space { Surface, Air };

struct InputSample {
    Vec3 position;
    double timestamp = 0.0;
    InputSource source = InputSource::Pen;
    std::optional<Space> declared_space;

    friend bool operator==(const InputSample&, const InputSample&) = default;
};

struct InputTrace {
    std::vector<InputSample> samples;
    nlohmann::json meta = nlohmann::json::object();
};

/// A run of consecutive samples in one space; indices refer to the matching
/// per-space sample list.
struct TraceSegment {
    Space space = Space::Surface;
    std::size_t first = 0;
    std::size_t count = 0;

    friend bool operator==(const TraceSegment&, const TraceSegment&) = default;
};

struct SegmentedTrace {
    std::vector<Vec3> surface_samples;
    std::vector<Vec3> air_samples;
    std::vector<TraceSegment> segments;
};

inline constexpr double kDefaultContactTolerance = 0.005;

const char* to_string(InputSource source);
const char* to_string(Space space);

/// {"samples":[{"p":[x,y,z],"t":..,"source":"pen","space":"air"|"surface"|null}], "meta":{..}}
InputTrace parse_trace(const nlohmann::json& document);
InputTrace parse_trace_text(const std::string& text);
nlohmann::json trace_to_json(const InputTrace& trace);

/// Splits a trace into on-surface samples (snapped onto the plane) and in-air
/// samples, keeping the order of runs. Throws ErrorKind::Geometry for samples
/// below the plane or on the plane outside the rectangle.
SegmentedTrace segment_trace(const InputTrace& trace, const SurfaceGeometry& surface,
                             double eps = kDefaultContactTolerance);

/// Resamples each polyline segment uniformly so consecutive output points are
/// at most `spacing` apart; original vertices are kept, so arc length is
/// preserved.
std::vector<Vec3> resample_polyline(const std::vector<Vec3>& points, double spacing);

double polyline_length(const std::vector<Vec3>& points);

}  // namespace xrsel
