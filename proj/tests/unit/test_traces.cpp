#include <doctest.h>

#include "oracles.hpp"
#include "xrsel/error.hpp"
#include "xrsel/traces.hpp"

using namespace xrsel;
using nlohmann::json;

namespace {

InputTrace make_trace(const std::vector<Vec3>& pts)
{
    InputTrace t;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        InputSample s;
        s.position = pts[i];
        s.timestamp = 0.01 * static_cast<double>(i);
        t.samples.push_back(s);
    }
    return t;
}

}  // namespace

TEST_SUITE("traces")
{
    TEST_CASE("two-sample document")
    {
        const InputTrace t = parse_trace_text(R"({"samples":[
            {"p":[0,0,0],"t":0.0,"source":"pen","space":"surface"},
            {"p":[0,0,0.1],"t":0.016,"source":"hand","space":null}],"meta":{"dataset":"x"}})");
        REQUIRE(t.samples.size() == 2);
        CHECK(t.samples[0].declared_space == Space::Surface);
        CHECK(t.samples[1].source == InputSource::Hand);
        CHECK_FALSE(t.samples[1].declared_space.has_value());
        CHECK(t.meta["dataset"] == "x");
    }

    TEST_CASE("schema violations")
    {
        CHECK_THROWS_AS(parse_trace_text(R"({"samples":[{"p":[0,0,0],"t":1},{"p":[0,0,0],"t":0.5}]})"), Error);
        CHECK_THROWS_AS(parse_trace_text(R"({"samples":[{"p":[0,0],"t":1}]})"), Error);
        CHECK_THROWS_AS(parse_trace_text(R"({"samples":[{"t":1}]})"), Error);
        CHECK_THROWS_AS(parse_trace_text(R"({"samples":[]})"), Error);
        CHECK_THROWS_AS(parse_trace_text(R"({"samples":[{"p":[0,0,0],"t":0,"source":"foot"}]})"), Error);
        CHECK_THROWS_AS(parse_trace_text("not json"), Error);
    }

    TEST_CASE("serialize and parse round trip")
    {
        oracle::Random rng(1);
        InputTrace t;
        for (int i = 0; i < 50; ++i) {
            InputSample s;
            s.position = rng.in_box({-1, -1, -1}, {1, 1, 1});
            s.timestamp = i * 0.1 + rng.uniform(0, 0.05);
            s.source = static_cast<InputSource>(i % 3);
            if (i % 4 == 1)
                s.declared_space = Space::Air;
            if (i % 4 == 2)
                s.declared_space = Space::Surface;
            t.samples.push_back(s);
        }
        t.meta = {{"technique", "brush"}};
        const InputTrace back = parse_trace_text(trace_to_json(t).dump());
        CHECK(back.samples == t.samples);
        CHECK(back.meta == t.meta);
    }

    TEST_CASE("geometric classification and snapping")
    {
        const SurfaceGeometry s;
        const double eps = kDefaultContactTolerance;
        const SegmentedTrace st = segment_trace(make_trace({{0, 0, 0}, {0.1, 0, 0.5 * eps}, {0, 0, 0.2}}), s);
        REQUIRE(st.surface_samples.size() == 2);
        CHECK(st.surface_samples[1] == Vec3{0.1, 0, 0});
        CHECK(st.air_samples.size() == 1);
    }

    TEST_CASE("alternating trace keeps segment order")
    {
        const SurfaceGeometry s;
        const SegmentedTrace st =
            segment_trace(make_trace({{0, 0, 0.1}, {0, 0, 0.2}, {0, 0, 0}, {0.1, 0, 0}, {0.1, 0.1, 0}, {0, 0, 0.3}}), s);
        REQUIRE(st.segments.size() == 3);
        CHECK(st.segments[0] == TraceSegment{Space::Air, 0, 2});
        CHECK(st.segments[1] == TraceSegment{Space::Surface, 0, 3});
        CHECK(st.segments[2] == TraceSegment{Space::Air, 2, 1});
        CHECK(st.surface_samples.size() + st.air_samples.size() == 6);
    }

    TEST_CASE("declared space wins over geometry")
    {
        const SurfaceGeometry s;
        InputTrace t = make_trace({{0, 0, 0.001}, {0, 0, 0.02}});
        t.samples[0].declared_space = Space::Air;
        t.samples[1].declared_space = Space::Surface;
        const SegmentedTrace st = segment_trace(t, s);
        CHECK(st.air_samples.size() == 1);
        CHECK(st.surface_samples[0] == Vec3{0, 0, 0});
    }

    TEST_CASE("impossible samples")
    {
        const SurfaceGeometry s;
        CHECK_THROWS_AS(segment_trace(make_trace({{0, 0, -0.1}}), s), Error);
        CHECK_THROWS_AS(segment_trace(make_trace({{5, 0, 0}}), s), Error);
    }

    TEST_CASE("segmentation is idempotent on snapped traces")
    {
        oracle::Random rng(2);
        const SurfaceGeometry s = oracle::random_surface(rng);
        std::vector<Vec3> pts;
        for (int i = 0; i < 100; ++i) {
            const Vec2 uv{rng.uniform(-0.4, 0.4) * s.width, rng.uniform(-0.4, 0.4) * s.height};
            const double h = i % 2 ? rng.uniform(-0.004, 0.004) : rng.uniform(0.01, 0.5);
            pts.push_back(from_surface_local(uv, s) + s.axis_z * h);
        }
        const SegmentedTrace a = segment_trace(make_trace(pts), s);
        std::vector<Vec3> again;
        std::size_t si = 0, ai = 0;
        for (const auto& seg : a.segments)
            for (std::size_t k = 0; k < seg.count; ++k)
                again.push_back(seg.space == Space::Surface ? a.surface_samples[si++] : a.air_samples[ai++]);
        const SegmentedTrace b = segment_trace(make_trace(again), s);
        CHECK(b.surface_samples == a.surface_samples);
        CHECK(b.air_samples == a.air_samples);
        CHECK(b.segments == a.segments);
    }

    TEST_CASE("resampling counts")
    {
        CHECK(resample_polyline({{0, 0, 0}, {1, 0, 0}}, 0.25).size() == 5);
        const std::vector<Vec3> square{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 0}};
        const auto r = resample_polyline(square, 0.5);
        CHECK(r.size() == 9);
        CHECK(r.front() == r.back());
        CHECK(resample_polyline({{1, 2, 3}}, 0.1).size() == 1);
        CHECK_THROWS_AS(resample_polyline(square, 0.0), Error);
    }

    TEST_CASE("resampling preserves arc length and respects spacing")
    {
        oracle::Random rng(3);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<Vec3> pts;
            const int n = rng.integer(2, 12);
            for (int i = 0; i < n; ++i)
                pts.push_back(rng.in_box({-1, -1, -1}, {1, 1, 1}));
            const double spacing = rng.uniform(0.01, 0.5);
            const auto out = resample_polyline(pts, spacing);
            const double l0 = polyline_length(pts);
            REQUIRE(std::abs(polyline_length(out) - l0) <= 1e-9 * l0);
            for (std::size_t i = 1; i < out.size(); ++i)
                REQUIRE(norm(out[i] - out[i - 1]) <= spacing * (1 + 1e-12));
            CHECK(out.front() == pts.front());
            CHECK(out.back() == pts.back());
        }
    }
}
