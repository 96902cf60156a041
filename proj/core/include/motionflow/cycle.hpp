#pragma once

#include <vector>

#include "motionflow/image.hpp"
#include "motionflow/losses.hpp"

namespace motionflow {

// The four flows linking a frame pair through an intermediate time in (0,1).
struct IntermediateFlows {
    FlowField mid_to_begin;  // intermediate -> first frame
    FlowField mid_to_end;    // intermediate -> second frame
    FlowField end_to_mid;    // second frame -> intermediate
    FlowField begin_to_mid;  // first frame -> intermediate
    double time = 0.5;
};

struct CompensatorConfig {
    int iters = 300;
    double step_size = 0.02;
    double step_decay = 0.5;
    double convergence_tol = 1e-5;
    CycleLossWeights weights;
    double time = 0.5;
    bool exclude_holes = true;
};

// Closed-form blend of bidirectional flows:
//   mid_to_begin = -(1-t) t F01 + t^2 F10        mid_to_end = (1-t)^2 F01 - t (1-t) F10
//   end_to_mid   = F10 - mid_to_begin            begin_to_mid = F01 - mid_to_end
IntermediateFlows approximate_intermediate_flows(const FlowField& f01, const FlowField& f10,
                                                 double time);

// The four forward warps in the fixed chain order (see CycleChain).
CycleChain build_cycle_chain(const Frame& begin, const Frame& end, const IntermediateFlows& flows);

struct RefineResult {
    IntermediateFlows flows;
    std::vector<double> loss_trace; // initial loss followed by accepted-step losses
};

// Gradients of the cycle loss with respect to the four flow fields.
struct CycleFlowGrads {
    FlowGrad begin_to_mid;
    FlowGrad mid_to_end;
    FlowGrad end_to_mid;
    FlowGrad mid_to_begin;
};

// One loss-and-gradient evaluation of the objective refine_flows descends on.
// Builds the warp chain internally; hole masks are treated as constants.
double cycle_loss_gradients(const Frame& begin, const Frame& end, const IntermediateFlows& flows,
                            const CycleLossWeights& w, bool exclude_holes, CycleFlowGrads& grads);

// Joint gradient descent on the cycle loss over all four flow fields, with
// step halving on non-decrease. The trace is non-increasing by construction.
RefineResult refine_flows(const Frame& begin, const Frame& end, const IntermediateFlows& init,
                          const CompensatorConfig& cfg);

// Joint propagation of the first frame and its label to the intermediate time
// using begin_to_mid for both.
std::pair<Frame, LabelMask> interpolate_pair(const Frame& begin, const LabelMask& begin_label,
                                             const IntermediateFlows& flows, int num_classes);

}  // namespace motionflow
