#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "motionflow/image.hpp"
#include "motionflow/warp.hpp"
#include "support/test_util.hpp"

using namespace motionflow;

TEST_CASE("unit shift on a 1x3 row splats exactly and fills the hole") {
    Frame f = make_frame(1, 3, 1);
    f.at(0, 0) = 0.3;
    f.at(0, 1) = 0.6;
    f.at(0, 2) = 0.9;
    FlowField flow = make_flow(1, 3, 1.0, 0.0);  // last pixel leaves the image

    WarpResult r = forward_warp(f, flow);
    CHECK(r.weights[0] == 0.0);
    CHECK(r.weights[1] == 1.0);
    CHECK(r.weights[2] == 1.0);
    CHECK(r.hole_mask[0] == 1);
    CHECK(r.hole_mask[1] == 0);
    CHECK(r.hole_mask[2] == 0);
    CHECK(r.frame.at(0, 0) == 0.3);  // hole keeps the source value
    CHECK(r.frame.at(0, 1) == 0.3);
    CHECK(r.frame.at(0, 2) == 0.6);
}

TEST_CASE("identity warp is bitwise exact") {
    testutil::Rng rng(7);
    Frame f = testutil::random_frame(rng, 8, 8, 3);
    WarpResult r = forward_warp(f, make_flow(8, 8));
    CHECK(r.frame.data == f.data);
    for (double w : r.weights) CHECK(w == 1.0);
    for (auto h : r.hole_mask) CHECK(h == 0);
}

TEST_CASE("integer translation moves values exactly") {
    testutil::Rng rng(11);
    const int h = 6, w = 6;
    Frame f = testutil::random_frame(rng, h, w, 1);
    FlowField flow = make_flow(h, w, 2.0, -1.0);
    WarpResult r = forward_warp(f, flow);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const bool covered = x >= 2 && y <= h - 2;
            if (covered) {
                CHECK(r.hole_mask[static_cast<std::size_t>(y) * w + x] == 0);
                CHECK(r.weights[static_cast<std::size_t>(y) * w + x] == 1.0);
                CHECK(r.frame.at(y, x) == f.at(y + 1, x - 2));
            } else {
                CHECK(r.hole_mask[static_cast<std::size_t>(y) * w + x] == 1);
                CHECK(r.frame.at(y, x) == f.at(y, x));
            }
        }
    }
}

TEST_CASE("splat mass is conserved when all footprints stay inside") {
    testutil::Rng rng(13);
    const int h = 8, w = 8;
    Frame f = testutil::random_frame(rng, h, w, 1);
    // Fractional displacements pointed inward so all four corners land inside.
    FlowField flow = make_flow(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double fu = rng.range(0.1, 0.9);
            const double fv = rng.range(0.1, 0.9);
            flow.u[flow.index(y, x)] = x == w - 1 ? -fu : fu;
            flow.v[flow.index(y, x)] = y == h - 1 ? -fv : fv;
        }
    }
    WarpResult r = forward_warp(f, flow);
    double total = 0.0;
    for (double wv : r.weights) total += wv;
    CHECK(std::abs(total - static_cast<double>(h) * w) < 1e-9);
}

TEST_CASE("warp matches the exhaustive splat oracle") {
    for (std::uint64_t seed : {21u, 22u, 23u, 24u}) {
        testutil::Rng rng(seed);
        const int h = rng.integer(3, 8), w = rng.integer(3, 8);
        const int ch = seed % 2 == 0 ? 3 : 1;
        Frame f = testutil::random_frame(rng, h, w, ch);
        FlowField flow = make_flow(h, w);
        for (std::size_t i = 0; i < flow.u.size(); ++i) {
            flow.u[i] = rng.range(-3.0, 3.0);
            flow.v[i] = rng.range(-3.0, 3.0);
        }
        testutil::SplatOracle oracle = testutil::splat_oracle(f, flow);
        WarpResult r = forward_warp(f, flow);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t p = static_cast<std::size_t>(y) * w + x;
                CHECK(std::abs(r.weights[p] - oracle.weight[p]) < 1e-12);
                const bool hole = oracle.weight[p] < kWarpWeightEpsilon;
                CHECK(r.hole_mask[p] == (hole ? 1 : 0));
                for (int c = 0; c < ch; ++c) {
                    const double expected =
                        hole ? f.at(y, x, c) : oracle.accum[p * ch + c] / oracle.weight[p];
                    CHECK(std::abs(r.frame.at(y, x, c) - expected) < 1e-9);
                }
            }
        }
    }
}

TEST_CASE("sources with non-finite displacement are dropped") {
    testutil::Rng rng(31);
    Frame f = testutil::random_frame(rng, 4, 4, 1);
    FlowField flow = testutil::random_safe_flow(rng, 4, 4, 1.0);
    flow.u[5] = std::numeric_limits<double>::quiet_NaN();
    WarpResult r = forward_warp(f, flow);
    for (double v : r.frame.data) CHECK(std::isfinite(v));
    FlowField clean = flow;
    clean.u[5] = 100.0;  // fully out of bounds contributes nothing either
    WarpResult r2 = forward_warp(f, clean);
    CHECK(r.frame.data == r2.frame.data);
    CHECK(r.weights == r2.weights);
}

TEST_CASE("label warp resolves ties toward the lower class id") {
    LabelMask m = make_mask(1, 2);
    m.at(0, 0) = 1;
    m.at(0, 1) = 2;
    FlowField flow = make_flow(1, 2);
    flow.u[0] = 0.5;
    flow.u[1] = -0.5;  // both classes splat weight 0.5 onto both pixels
    LabelMask out = forward_warp_labels(m, flow, 3);
    CHECK(out.at(0, 0) == 1);
    CHECK(out.at(0, 1) == 1);
}

TEST_CASE("label warp leaves unreachable pixels as background") {
    LabelMask m = make_mask(1, 3, 1);
    FlowField flow = make_flow(1, 3, 1.0, 0.0);
    LabelMask out = forward_warp_labels(m, flow, 2);
    CHECK(out.at(0, 0) == 0);  // no splat mass, background despite class-1 source
    CHECK(out.at(0, 1) == 1);
    CHECK(out.at(0, 2) == 1);
}

TEST_CASE("label warp equals the one-hot oracle") {
    for (std::uint64_t seed : {41u, 42u, 43u}) {
        testutil::Rng rng(seed);
        const int h = rng.integer(3, 8), w = rng.integer(3, 8);
        const int nc = 4;
        LabelMask m = testutil::random_mask(rng, h, w, nc);
        FlowField flow = make_flow(h, w);
        for (std::size_t i = 0; i < flow.u.size(); ++i) {
            flow.u[i] = rng.range(-2.0, 2.0);
            flow.v[i] = rng.range(-2.0, 2.0);
        }
        const std::vector<double> score = testutil::label_splat_oracle(m, flow, nc);
        LabelMask out = forward_warp_labels(m, flow, nc);
        for (std::size_t p = 0; p < out.ids.size(); ++p) {
            double total = 0.0;
            int best = 0;
            double best_score = 0.0;
            for (int c = 0; c < nc; ++c) {
                total += score[p * nc + c];
                if (score[p * nc + c] > best_score) {
                    best_score = score[p * nc + c];
                    best = c;
                }
            }
            const int expected = total < kWarpWeightEpsilon ? 0 : best;
            CHECK(out.ids[p] == expected);
        }
    }
}

TEST_CASE("label warp validates ids against num_classes") {
    LabelMask m = make_mask(2, 2, 3);
    CHECK_THROWS_AS(forward_warp_labels(m, make_flow(2, 2), 3), std::invalid_argument);
    CHECK_THROWS_AS(forward_warp_labels(m, make_flow(3, 2), 4), std::invalid_argument);
}

TEST_CASE("flow gradient matches finite differences") {
    testutil::Rng rng(53);
    const int h = 5, w = 5;
    Frame f = testutil::random_frame(rng, h, w, 1);
    FlowField flow = testutil::random_safe_flow(rng, h, w);
    std::vector<double> upstream(f.data.size());
    for (double& v : upstream) v = rng.range(-1.0, 1.0);

    const auto loss = [&](const FlowField& fl) {
        WarpResult r = forward_warp(f, fl);
        double s = 0.0;
        for (std::size_t i = 0; i < upstream.size(); ++i) s += upstream[i] * r.frame.data[i];
        return s;
    };
    FlowGrad analytic = warp_flow_gradient(f, flow, upstream);
    FlowGrad fd = testutil::fd_flow_gradient(loss, flow);
    CHECK(testutil::flow_grad_rel_err(analytic, fd) < 1e-3);
}

TEST_CASE("frame gradient matches finite differences to roundoff") {
    testutil::Rng rng(59);
    const int h = 5, w = 4;
    Frame f = testutil::random_frame(rng, h, w, 1);
    FlowField flow = testutil::random_safe_flow(rng, h, w);
    std::vector<double> upstream(f.data.size());
    for (double& v : upstream) v = rng.range(-1.0, 1.0);

    WarpResult r = forward_warp(f, flow);
    std::vector<double> analytic(f.data.size(), 0.0);
    warp_backward(f, flow, r, upstream, &analytic, nullptr);

    const auto loss = [&](const Frame& fr) {
        WarpResult rr = forward_warp(fr, flow);
        double s = 0.0;
        for (std::size_t i = 0; i < upstream.size(); ++i) s += upstream[i] * rr.frame.data[i];
        return s;
    };
    std::vector<double> fd = testutil::fd_frame_gradient(loss, f);
    CHECK(testutil::normwise_rel_err(analytic, fd) < 1e-8);  // warp is linear in the frame
}

TEST_CASE("constant frames produce vanishing flow gradients") {
    const int h = 6, w = 6;
    Frame f = make_frame(h, w, 1, 0.7);
    testutil::Rng rng(61);
    FlowField flow = testutil::random_safe_flow(rng, h, w);
    std::vector<double> upstream(f.data.size());
    for (double& v : upstream) v = rng.range(-1.0, 1.0);
    FlowGrad g = warp_flow_gradient(f, flow, upstream);
    for (std::size_t i = 0; i < g.du.size(); ++i) {
        CHECK(std::abs(g.du[i]) < 1e-10);
        CHECK(std::abs(g.dv[i]) < 1e-10);
    }
}

TEST_CASE("zero upstream produces zero gradients") {
    testutil::Rng rng(67);
    Frame f = testutil::random_frame(rng, 4, 4, 1);
    FlowField flow = testutil::random_safe_flow(rng, 4, 4);
    std::vector<double> upstream(f.data.size(), 0.0);
    WarpResult r = forward_warp(f, flow);
    std::vector<double> fg(f.data.size(), 0.0);
    FlowGrad g;
    g.du.assign(flow.u.size(), 0.0);
    g.dv.assign(flow.v.size(), 0.0);
    warp_backward(f, flow, r, upstream, &fg, &g);
    for (double v : fg) CHECK(v == 0.0);
    for (double v : g.du) CHECK(v == 0.0);
    for (double v : g.dv) CHECK(v == 0.0);
}
