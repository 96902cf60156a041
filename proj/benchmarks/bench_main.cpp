#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "motionflow/cycle.hpp"
#include "motionflow/flow_estimator.hpp"
#include "motionflow/image.hpp"
#include "motionflow/losses.hpp"
#include "motionflow/synth.hpp"
#include "motionflow/warp.hpp"

namespace {

using namespace motionflow;

std::uint64_t splitmix(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

double unit(std::uint64_t& state) {
    return static_cast<double>(splitmix(state) >> 11) * 0x1.0p-53;
}

Frame random_frame(int h, int w, int ch, std::uint64_t seed) {
    Frame f = make_frame(h, w, ch);
    for (double& v : f.data) v = unit(seed);
    return f;
}

FlowField random_flow(int h, int w, double mag, std::uint64_t seed) {
    FlowField f = make_flow(h, w);
    for (std::size_t i = 0; i < f.u.size(); ++i) {
        f.u[i] = (2.0 * unit(seed) - 1.0) * mag;
        f.v[i] = (2.0 * unit(seed) - 1.0) * mag;
    }
    return f;
}

void bm_forward_warp(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const Frame frame = random_frame(n, n, 1, 42);
    const FlowField flow = random_flow(n, n, 3.0, 43);
    for (auto _ : state) {
        WarpResult r = forward_warp(frame, flow);
        benchmark::DoNotOptimize(r.frame.data.data());
    }
    state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(bm_forward_warp)->Arg(64)->Arg(256);

void bm_warp_flow_gradient(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const Frame frame = random_frame(n, n, 1, 7);
    const FlowField flow = random_flow(n, n, 3.0, 8);
    std::uint64_t seed = 9;
    std::vector<double> upstream(frame.data.size());
    for (double& v : upstream) v = 2.0 * unit(seed) - 1.0;
    for (auto _ : state) {
        FlowGrad g = warp_flow_gradient(frame, flow, upstream);
        benchmark::DoNotOptimize(g.du.data());
    }
    state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(bm_warp_flow_gradient)->Arg(64)->Arg(256);

void bm_perceptual_loss(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const Frame a = random_frame(n, n, 1, 11);
    const Frame b = random_frame(n, n, 1, 12);
    for (auto _ : state) benchmark::DoNotOptimize(perceptual_loss(a, b));
    state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(bm_perceptual_loss)->Arg(64)->Arg(256);

void bm_estimate_flow(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    SceneSpec spec;
    spec.width = n;
    spec.height = n;
    spec.num_frames = 2;
    spec.background_seed = 3;
    spec.background_drift = {1.5, -1.0};
    auto [frames, masks] = render_sequence(spec, 3);
    EstimatorConfig cfg;
    cfg.pyramid_levels = 3;
    cfg.iters_per_level = 50;
    for (auto _ : state) {
        EstimateResult r = estimate_flow(frames[0], frames[1], cfg);
        benchmark::DoNotOptimize(r.final_loss);
    }
}
BENCHMARK(bm_estimate_flow)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void bm_refine_flows(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    SceneSpec spec;
    spec.width = n;
    spec.height = n;
    spec.num_frames = 2;
    spec.background_seed = 5;
    spec.background_drift = {1.0, 0.5};
    auto [frames, masks] = render_sequence(spec, 5);
    EstimatorConfig cfg;
    cfg.pyramid_levels = 3;
    cfg.iters_per_level = 40;
    auto [fwd, bwd] = estimate_bidirectional(frames[0], frames[1], cfg);
    const IntermediateFlows init = approximate_intermediate_flows(fwd.flow, bwd.flow, 0.5);
    CompensatorConfig ccfg;
    ccfg.iters = 40;
    for (auto _ : state) {
        RefineResult r = refine_flows(frames[0], frames[1], init, ccfg);
        benchmark::DoNotOptimize(r.loss_trace.data());
    }
}
BENCHMARK(bm_refine_flows)->Arg(32)->Arg(48)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
