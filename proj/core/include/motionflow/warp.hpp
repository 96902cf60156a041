#pragma once

#include <cstdint>
#include <vector>

#include "motionflow/image.hpp"

namespace motionflow {

// Splat weights below this are treated as holes rather than signal.
inline constexpr double kWarpWeightEpsilon = 1e-4;

struct WarpResult {
    Frame frame;                 // weight-normalized splat, holes filled from the source
    std::vector<double> weights; // accumulated splat weight per pixel
    std::vector<std::uint8_t> hole_mask; // 1 where weight < kWarpWeightEpsilon
};

// Gradient of a scalar loss with respect to a flow field.
struct FlowGrad {
    std::vector<double> du;
    std::vector<double> dv;
};

// Forward (splatting) warp: every source pixel distributes its value onto the
// four integer neighbors of its displaced position with bilinear weights.
// Out-of-bounds corners are discarded. Pixels that accumulate no weight are
// holes: they keep the source value at the same coordinate and are flagged.
WarpResult forward_warp(const Frame& frame, const FlowField& flow);

// One-hot splat per class with unnormalized weights, then argmax. Ties break
// toward the lower class id; pixels below the weight threshold become
// background.
LabelMask forward_warp_labels(const LabelMask& mask, const FlowField& flow, int num_classes);

// Adjoint of forward_warp. Given upstream = dLoss/d(output frame), accumulates
// dLoss/d(source frame) into frame_grad and dLoss/d(u,v) into flow_grad (either
// may be null). `warped` must be forward_warp(frame, flow). Hole pixels pass
// their upstream straight through to the source frame and contribute no flow
// gradient.
void warp_backward(const Frame& frame, const FlowField& flow, const WarpResult& warped,
                   const std::vector<double>& upstream,
                   std::vector<double>* frame_grad, FlowGrad* flow_grad);

// dLoss/d(u,v) for loss(forward_warp(frame, flow)) given dLoss/d(output).
FlowGrad warp_flow_gradient(const Frame& frame, const FlowField& flow,
                            const std::vector<double>& upstream);

}  // namespace motionflow
