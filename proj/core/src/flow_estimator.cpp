#include "motionflow/flow_estimator.hpp"

#include <algorithm>
#include <cmath>

#include "motionflow/errors.hpp"
#include "motionflow/warp.hpp"

namespace motionflow {

namespace {

double inf_norm(const FlowGrad& g) {
    double m = 0.0;
    for (double x : g.du) m = std::max(m, std::abs(x));
    for (double x : g.dv) m = std::max(m, std::abs(x));
    return m;
}

// The splat objective's per-pixel gradient is dominated by kink noise from
// the L1 terms and the bilinear hats, so raw descent directions are spatially
// incoherent and wedge at integer flow (notably the zero init). Diffusing the
// gradient before stepping yields coherent-motion directions; acceptance
// below still uses the exact loss, so this only preconditions the search.
constexpr int kGradientBlurPasses = 16;

// Separable binomial [1 2 1]/4 blur with mirrored borders, applied in place.
void blur_field(std::vector<double>& f, int h, int w, int passes) {
    std::vector<double> tmp(f.size());
    for (int pass = 0; pass < passes; ++pass) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const int xm = x > 0 ? x - 1 : 0, xp = x + 1 < w ? x + 1 : w - 1;
                tmp[y * w + x] = 0.25 * f[y * w + xm] + 0.5 * f[y * w + x] + 0.25 * f[y * w + xp];
            }
        }
        for (int y = 0; y < h; ++y) {
            const int ym = y > 0 ? y - 1 : 0, yp = y + 1 < h ? y + 1 : h - 1;
            for (int x = 0; x < w; ++x) {
                f[y * w + x] =
                    0.25 * tmp[ym * w + x] + 0.5 * tmp[y * w + x] + 0.25 * tmp[yp * w + x];
            }
        }
    }
}

FlowGrad preconditioned(const FlowGrad& grad, int h, int w) {
    FlowGrad dir = grad;
    blur_field(dir.du, h, w, kGradientBlurPasses);
    blur_field(dir.dv, h, w, kGradientBlurPasses);
    return dir;
}

void check_config(const EstimatorConfig& cfg) {
    detail::require(cfg.pyramid_levels >= 1, "estimate_flow: pyramid_levels must be >= 1");
    detail::require(cfg.iters_per_level >= 1, "estimate_flow: iters_per_level must be >= 1");
    detail::require(cfg.step_size > 0.0, "estimate_flow: step_size must be positive");
    detail::require(cfg.step_decay > 0.0 && cfg.step_decay < 1.0,
                    "estimate_flow: step_decay must be in (0,1)");
    detail::require(cfg.convergence_tol > 0.0, "estimate_flow: convergence_tol must be positive");
}

// Minimize the predictor loss at one pyramid level by preconditioned
// normalized gradient descent with step halving. The step is expressed in
// pixels of flow change: each accepted update moves the most-sensitive pixel
// by exactly `step`.
void descend_level(const Frame& src, const Frame& dst, const EstimatorConfig& cfg, int level,
                   FlowField& flow, std::vector<double>& trace) {
    FlowGrad grad;
    WarpResult warped = forward_warp(src, flow);
    double loss =
        predictor_loss_backward(src, warped, dst, flow, cfg.weights, cfg.exclude_holes, grad);
    trace.push_back(loss);

    double step = cfg.step_size;
    const std::size_t npix = flow.u.size();
    for (int it = 0; it < cfg.iters_per_level; ++it) {
        if (!std::isfinite(loss))
            throw NumericalFailure("flow descent produced a non-finite loss", level, it);
        const FlowGrad dir = preconditioned(grad, flow.height, flow.width);
        const double gmax = inf_norm(dir);
        if (gmax == 0.0) break;

        FlowField cand = flow;
        const double scale = step / gmax;
        for (std::size_t i = 0; i < npix; ++i) {
            cand.u[i] -= scale * dir.du[i];
            cand.v[i] -= scale * dir.dv[i];
        }
        const double cand_loss =
            predictor_loss(forward_warp(src, cand), dst, cand, cfg.weights, cfg.exclude_holes);

        if (std::isfinite(cand_loss) && cand_loss < loss) {
            const double rel = (loss - cand_loss) / std::max(std::abs(loss), 1e-300);
            flow = std::move(cand);
            warped = forward_warp(src, flow);
            loss = predictor_loss_backward(src, warped, dst, flow, cfg.weights,
                                           cfg.exclude_holes, grad);
            trace.push_back(loss);
            if (rel < cfg.convergence_tol) break;
        } else {
            step *= cfg.step_decay;
            if (step < 1e-12) break;
        }
    }
}

}  // namespace

EstimateResult estimate_flow(const Frame& src, const Frame& dst, const EstimatorConfig& cfg) {
    detail::require(src.same_shape(dst), "estimate_flow: src and dst shapes differ");
    detail::require(src.height >= 1 && src.width >= 1, "estimate_flow: empty input");
    check_config(cfg);
    const int coarsest = 1 << (cfg.pyramid_levels - 1);
    detail::require(src.height >= coarsest && src.width >= coarsest,
                    "estimate_flow: frames smaller than the coarsest pyramid level");

    EstimateResult res;
    res.level_traces.resize(cfg.pyramid_levels);
    FlowField flow;
    for (int li = 0; li < cfg.pyramid_levels; ++li) {
        const int factor = 1 << (cfg.pyramid_levels - 1 - li);
        const Frame src_l = downsample(src, factor);
        const Frame dst_l = downsample(dst, factor);
        if (li == 0)
            flow = make_flow(src_l.height, src_l.width);
        else
            flow = resize_flow(flow, src_l.height, src_l.width);
        descend_level(src_l, dst_l, cfg, li, flow, res.level_traces[li]);
    }
    res.final_loss = res.level_traces.back().back();
    res.flow = std::move(flow);
    return res;
}

std::pair<EstimateResult, EstimateResult> estimate_bidirectional(const Frame& a, const Frame& b,
                                                                 const EstimatorConfig& cfg) {
    return {estimate_flow(a, b, cfg), estimate_flow(b, a, cfg)};
}

}  // namespace motionflow
