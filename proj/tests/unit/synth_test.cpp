#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "motionflow/metrics.hpp"
#include "motionflow/synth.hpp"
#include "support/test_util.hpp"

using namespace motionflow;

namespace {

SceneSpec moving_ellipse_scene() {
    SceneSpec spec;
    spec.width = 32;
    spec.height = 32;
    spec.num_frames = 3;
    spec.background_seed = 4;
    ShapeSpec shape;
    shape.kind = ShapeKind::ellipse;
    shape.center = {16.0, 16.0};
    shape.radii = {6.0, 4.5};
    shape.class_id = 1;
    shape.velocity = {1.0, 0.0};
    shape.texture_seed = 9;
    spec.shapes.push_back(shape);
    return spec;
}

std::pair<double, double> mask_centroid(const LabelMask& m, int cls) {
    double sx = 0.0, sy = 0.0;
    int n = 0;
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
            if (m.at(y, x) == cls) {
                sx += x;
                sy += y;
                ++n;
            }
    REQUIRE(n > 0);
    return {sx / n, sy / n};
}

}  // namespace

TEST_CASE("rendering is deterministic") {
    SceneSpec spec = moving_ellipse_scene();
    spec.noise_sigma = 0.05;
    auto [f1, m1] = render_sequence(spec, 42);
    auto [f2, m2] = render_sequence(spec, 42);
    REQUIRE(f1.size() == 3);
    REQUIRE(m1.size() == 3);
    for (std::size_t i = 0; i < f1.size(); ++i) {
        CHECK(f1[i].data == f2[i].data);
        CHECK(m1[i].ids == m2[i].ids);
    }
    auto [f3, m3] = render_sequence(spec, 43);
    CHECK(f1[0].data != f3[0].data);  // seed reaches the noise
}

TEST_CASE("static scenes repeat the first frame") {
    SceneSpec spec = moving_ellipse_scene();
    spec.shapes[0].velocity = {0.0, 0.0};
    auto [frames, masks] = render_sequence(spec, 7);
    CHECK(frames[1].data == frames[0].data);
    CHECK(frames[2].data == frames[0].data);
    CHECK(masks[1].ids == masks[0].ids);
    FlowField gt = ground_truth_flow(spec, 0);
    for (std::size_t i = 0; i < gt.u.size(); ++i) {
        CHECK(gt.u[i] == 0.0);
        CHECK(gt.v[i] == 0.0);
    }
}

TEST_CASE("frames stay inside the unit range") {
    SceneSpec spec = moving_ellipse_scene();
    spec.noise_sigma = 0.2;
    auto [frames, masks] = render_sequence(spec, 11);
    for (const Frame& f : frames)
        for (double v : f.data) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
}

TEST_CASE("noiseless sequence frames equal the analytic render") {
    SceneSpec spec = moving_ellipse_scene();
    auto [frames, masks] = render_sequence(spec, 13);
    Frame direct = render_at_time(spec, 1.0);
    CHECK(frames[1].data == direct.data);
    LabelMask dmask = mask_at_time(spec, 1.0);
    CHECK(masks[1].ids == dmask.ids);
}

TEST_CASE("a translating shape advances its mask centroid") {
    SceneSpec spec = moving_ellipse_scene();
    auto [frames, masks] = render_sequence(spec, 21);
    auto [cx0, cy0] = mask_centroid(masks[0], 1);
    auto [cx1, cy1] = mask_centroid(masks[1], 1);
    CHECK(cx1 - cx0 == doctest::Approx(1.0).epsilon(0.25));
    CHECK(std::abs(cy1 - cy0) < 0.25);
}

TEST_CASE("ground-truth flow of a spinning shape matches the rotation field") {
    SceneSpec spec = moving_ellipse_scene();
    spec.shapes[0].velocity = {0.0, 0.0};
    spec.shapes[0].spin_deg = 10.0;
    const double w = 10.0 * std::numbers::pi / 180.0;
    const double cw = std::cos(w), sw = std::sin(w);

    const int t = 1;
    FlowField gt = ground_truth_flow(spec, t);
    LabelMask mask = mask_at_time(spec, static_cast<double>(t));
    const double cx = 16.0, cy = 16.0;  // spin is about the static centroid
    int inside = 0;
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            const std::size_t i = gt.index(y, x);
            if (mask.at(y, x) == 1) {
                ++inside;
                const double dx = x - cx, dy = y - cy;
                CHECK(gt.u[i] == doctest::Approx(cw * dx - sw * dy - dx).epsilon(1e-9));
                CHECK(gt.v[i] == doctest::Approx(sw * dx + cw * dy - dy).epsilon(1e-9));
            } else {
                CHECK(gt.u[i] == 0.0);
                CHECK(gt.v[i] == 0.0);
            }
        }
    }
    CHECK(inside > 20);
}

TEST_CASE("background drift fills the flow outside shapes") {
    SceneSpec spec = moving_ellipse_scene();
    spec.background_drift = {0.7, -0.4};
    FlowField gt = ground_truth_flow(spec, 0);
    LabelMask mask = mask_at_time(spec, 0.0);
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x)
            if (mask.at(y, x) == 0) {
                CHECK(gt.u[gt.index(y, x)] == 0.7);
                CHECK(gt.v[gt.index(y, x)] == -0.4);
            }
}

TEST_CASE("scene class count covers the largest id") {
    SceneSpec spec = moving_ellipse_scene();
    spec.shapes[0].class_id = 3;
    CHECK(scene_num_classes(spec) == 4);
    SceneSpec empty;
    CHECK(scene_num_classes(empty) == 1);
}

TEST_CASE("scene validation rejects malformed shapes") {
    SceneSpec spec = moving_ellipse_scene();
    spec.shapes[0].radii = {0.0, 3.0};
    CHECK_THROWS_AS(render_at_time(spec, 0.0), std::invalid_argument);

    spec = moving_ellipse_scene();
    spec.shapes[0].class_id = 0;
    CHECK_THROWS_AS(render_at_time(spec, 0.0), std::invalid_argument);

    spec = moving_ellipse_scene();
    spec.shapes[0].kind = ShapeKind::polygon;
    spec.shapes[0].vertices = {{1.0, 1.0}, {2.0, 2.0}};
    CHECK_THROWS_AS(render_at_time(spec, 0.0), std::invalid_argument);

    spec = moving_ellipse_scene();
    spec.width = 0;
    CHECK_THROWS_AS(render_at_time(spec, 0.0), std::invalid_argument);
}

TEST_CASE("polygon shapes render and move like ellipses") {
    SceneSpec spec;
    spec.width = 24;
    spec.height = 24;
    spec.num_frames = 2;
    spec.background_seed = 6;
    ShapeSpec tri;
    tri.kind = ShapeKind::polygon;
    tri.vertices = {{8.0, 8.0}, {16.0, 9.0}, {12.0, 17.0}};
    tri.class_id = 2;
    tri.velocity = {0.0, 1.0};
    tri.texture_seed = 2;
    spec.shapes.push_back(tri);

    auto [frames, masks] = render_sequence(spec, 8);
    auto [cx0, cy0] = mask_centroid(masks[0], 2);
    auto [cx1, cy1] = mask_centroid(masks[1], 2);
    CHECK(cy1 - cy0 == doctest::Approx(1.0).epsilon(0.35));
    CHECK(std::abs(cx1 - cx0) < 0.35);
}
