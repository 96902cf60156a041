#include "motionflow/cycle.hpp"

#include <algorithm>
#include <cmath>

#include "motionflow/errors.hpp"
#include "motionflow/warp.hpp"

namespace motionflow {

namespace {

FlowField blend(const FlowField& a, double ca, const FlowField& b, double cb) {
    FlowField out = make_flow(a.height, a.width);
    for (std::size_t i = 0; i < out.u.size(); ++i) {
        out.u[i] = ca * a.u[i] + cb * b.u[i];
        out.v[i] = ca * a.v[i] + cb * b.v[i];
    }
    return out;
}

FlowField subtract(const FlowField& a, const FlowField& b) {
    FlowField out = make_flow(a.height, a.width);
    for (std::size_t i = 0; i < out.u.size(); ++i) {
        out.u[i] = a.u[i] - b.u[i];
        out.v[i] = a.v[i] - b.v[i];
    }
    return out;
}

ValidityMask holes_to_validity(const std::vector<std::uint8_t>& holes) {
    ValidityMask valid(holes.size());
    for (std::size_t i = 0; i < holes.size(); ++i) valid[i] = holes[i] ? 0.0 : 1.0;
    return valid;
}

ValidityMask joint_validity(const std::vector<std::uint8_t>& a,
                            const std::vector<std::uint8_t>& b) {
    ValidityMask valid(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) valid[i] = (a[i] || b[i]) ? 0.0 : 1.0;
    return valid;
}

void add_scaled(std::vector<double>& dst, const std::vector<double>& src, double scale) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

// d(pair loss)/d(first frame) for w_l1 * L1 + w_p * Lp, with Lp skipped on
// frames too small for the feature pyramid.
double pair_loss_backward(const Frame& a, const Frame& b, const ValidityMask& valid,
                          double w_l1, double w_p, std::vector<double>& grad_a) {
    std::vector<double> g;
    double loss = w_l1 * l1_loss_backward(a, b, valid, g);
    grad_a.assign(a.data.size(), 0.0);
    add_scaled(grad_a, g, w_l1);
    if (w_p != 0.0 && a.height >= 4 && a.width >= 4) {
        loss += w_p * perceptual_loss_backward(a, b, valid, g);
        add_scaled(grad_a, g, w_p);
    }
    return loss;
}

// Cycle loss plus gradients w.r.t. all four flows, walking the warp chain in
// reverse. `flows` must be the fields the chain was built from. Hole masks are
// treated as constants of the differentiation.
double cycle_loss_with_grads(const CycleChain& chain, const IntermediateFlows& flows,
                             const CycleLossWeights& w, bool exclude_holes,
                             CycleFlowGrads& grads) {
    ValidityMask v_begin, v_mid, v_end;
    if (exclude_holes) {
        v_begin = holes_to_validity(chain.backward_begin.hole_mask);
        v_mid = joint_validity(chain.forward_mid.hole_mask, chain.backward_mid.hole_mask);
        v_end = holes_to_validity(chain.forward_end.hole_mask);
    }

    std::vector<double> g_bb, g_fe_direct, g_fm_direct, g_bm_direct;
    double loss = pair_loss_backward(chain.backward_begin.frame, chain.begin, v_begin,
                                     w.endpoint0, w.perceptual, g_bb);
    loss += pair_loss_backward(chain.forward_end.frame, chain.end, v_end, w.endpoint1,
                               w.perceptual, g_fe_direct);
    loss += pair_loss_backward(chain.forward_mid.frame, chain.backward_mid.frame, v_mid,
                               w.intermediate, w.perceptual, g_fm_direct);
    pair_loss_backward(chain.backward_mid.frame, chain.forward_mid.frame, v_mid, w.intermediate,
                       w.perceptual, g_bm_direct);

    // Stage 4: backward_begin = warp(backward_mid, mid_to_begin)
    std::vector<double> g_bm;
    warp_backward(chain.backward_mid.frame, flows.mid_to_begin, chain.backward_begin, g_bb,
                  &g_bm, &grads.mid_to_begin);
    add_scaled(g_bm, g_bm_direct, 1.0);

    // Stage 3: backward_mid = warp(forward_end, end_to_mid)
    std::vector<double> g_fe;
    warp_backward(chain.forward_end.frame, flows.end_to_mid, chain.backward_mid, g_bm,
                  &g_fe, &grads.end_to_mid);
    add_scaled(g_fe, g_fe_direct, 1.0);

    // Stage 2: forward_end = warp(forward_mid, mid_to_end)
    std::vector<double> g_fm;
    warp_backward(chain.forward_mid.frame, flows.mid_to_end, chain.forward_end, g_fe,
                  &g_fm, &grads.mid_to_end);
    add_scaled(g_fm, g_fm_direct, 1.0);

    // Stage 1: forward_mid = warp(begin, begin_to_mid)
    warp_backward(chain.begin, flows.begin_to_mid, chain.forward_mid, g_fm, nullptr,
                  &grads.begin_to_mid);
    return loss;
}

double inf_norm4(const CycleFlowGrads& g) {
    double m = 0.0;
    for (const FlowGrad* fg : {&g.begin_to_mid, &g.mid_to_end, &g.end_to_mid, &g.mid_to_begin}) {
        for (double x : fg->du) m = std::max(m, std::abs(x));
        for (double x : fg->dv) m = std::max(m, std::abs(x));
    }
    return m;
}

void step_field(FlowField& f, const FlowGrad& g, double scale) {
    for (std::size_t i = 0; i < f.u.size(); ++i) {
        f.u[i] -= scale * g.du[i];
        f.v[i] -= scale * g.dv[i];
    }
}

void check_flows(const Frame& begin, const IntermediateFlows& flows) {
    const auto fit = [&](const FlowField& f) {
        return f.height == begin.height && f.width == begin.width;
    };
    detail::require(fit(flows.mid_to_begin) && fit(flows.mid_to_end) && fit(flows.end_to_mid) &&
                        fit(flows.begin_to_mid),
                    "cycle: flow shapes do not match the frames");
}

}  // namespace

IntermediateFlows approximate_intermediate_flows(const FlowField& f01, const FlowField& f10,
                                                 double time) {
    detail::require(f01.same_shape(f10), "approximate_intermediate_flows: shapes differ");
    detail::require(time > 0.0 && time < 1.0,
                    "approximate_intermediate_flows: time must be in (0,1)");
    const double t = time;
    IntermediateFlows out;
    out.time = t;
    out.mid_to_begin = blend(f01, -(1.0 - t) * t, f10, t * t);
    out.mid_to_end = blend(f01, (1.0 - t) * (1.0 - t), f10, -t * (1.0 - t));
    out.end_to_mid = subtract(f10, out.mid_to_begin);
    out.begin_to_mid = subtract(f01, out.mid_to_end);
    return out;
}

CycleChain build_cycle_chain(const Frame& begin, const Frame& end,
                             const IntermediateFlows& flows) {
    detail::require(begin.same_shape(end), "build_cycle_chain: frame shapes differ");
    check_flows(begin, flows);
    CycleChain chain;
    chain.begin = begin;
    chain.end = end;
    chain.forward_mid = forward_warp(begin, flows.begin_to_mid);
    chain.forward_end = forward_warp(chain.forward_mid.frame, flows.mid_to_end);
    chain.backward_mid = forward_warp(chain.forward_end.frame, flows.end_to_mid);
    chain.backward_begin = forward_warp(chain.backward_mid.frame, flows.mid_to_begin);
    return chain;
}

RefineResult refine_flows(const Frame& begin, const Frame& end, const IntermediateFlows& init,
                          const CompensatorConfig& cfg) {
    detail::require(begin.same_shape(end), "refine_flows: frame shapes differ");
    check_flows(begin, init);
    detail::require(cfg.iters >= 1, "refine_flows: iters must be >= 1");
    detail::require(cfg.step_size > 0.0, "refine_flows: step_size must be positive");
    detail::require(cfg.step_decay > 0.0 && cfg.step_decay < 1.0,
                    "refine_flows: step_decay must be in (0,1)");
    detail::require(cfg.convergence_tol > 0.0, "refine_flows: convergence_tol must be positive");

    RefineResult res;
    res.flows = init;

    CycleFlowGrads grads;
    CycleChain chain = build_cycle_chain(begin, end, res.flows);
    double loss = cycle_loss_with_grads(chain, res.flows, cfg.weights, cfg.exclude_holes, grads);
    res.loss_trace.push_back(loss);

    double step = cfg.step_size;
    for (int it = 0; it < cfg.iters; ++it) {
        if (!std::isfinite(loss))
            throw NumericalFailure("cycle refinement produced a non-finite loss", -1, it);
        const double gmax = inf_norm4(grads);
        if (gmax == 0.0) break;

        IntermediateFlows cand = res.flows;
        const double scale = step / gmax;
        step_field(cand.begin_to_mid, grads.begin_to_mid, scale);
        step_field(cand.mid_to_end, grads.mid_to_end, scale);
        step_field(cand.end_to_mid, grads.end_to_mid, scale);
        step_field(cand.mid_to_begin, grads.mid_to_begin, scale);

        CycleChain cand_chain = build_cycle_chain(begin, end, cand);
        const double cand_loss = cycle_loss(cand_chain, cfg.weights, cfg.exclude_holes);

        if (std::isfinite(cand_loss) && cand_loss < loss) {
            const double rel = (loss - cand_loss) / std::max(std::abs(loss), 1e-300);
            res.flows = std::move(cand);
            loss = cycle_loss_with_grads(cand_chain, res.flows, cfg.weights, cfg.exclude_holes,
                                         grads);
            res.loss_trace.push_back(loss);
            if (rel < cfg.convergence_tol) break;
        } else {
            step *= cfg.step_decay;
            if (step < 1e-12) break;
        }
    }
    return res;
}

double cycle_loss_gradients(const Frame& begin, const Frame& end, const IntermediateFlows& flows,
                            const CycleLossWeights& w, bool exclude_holes, CycleFlowGrads& grads) {
    const CycleChain chain = build_cycle_chain(begin, end, flows);
    return cycle_loss_with_grads(chain, flows, w, exclude_holes, grads);
}

std::pair<Frame, LabelMask> interpolate_pair(const Frame& begin, const LabelMask& begin_label,
                                             const IntermediateFlows& flows, int num_classes) {
    detail::require(begin.height == begin_label.height && begin.width == begin_label.width,
                    "interpolate_pair: frame and label shapes differ");
    check_flows(begin, flows);
    WarpResult warped = forward_warp(begin, flows.begin_to_mid);
    LabelMask label = forward_warp_labels(begin_label, flows.begin_to_mid, num_classes);
    return {std::move(warped.frame), std::move(label)};
}

}  // namespace motionflow
