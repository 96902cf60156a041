#pragma once

#include <cstdint>
#include <vector>

#include "motionflow/image.hpp"
#include "motionflow/warp.hpp"

namespace motionflow {

struct PredictorLossWeights {
    double l1 = 0.7;
    double perceptual = 0.2;
    double smooth = 0.1;
};

struct CycleLossWeights {
    double endpoint0 = 1.0;    // reconstructed start vs. raw start
    double intermediate = 0.8; // forward mid vs. backward mid
    double endpoint1 = 2.0;    // predicted end vs. raw end
    double perceptual = 0.01;
};

// Inputs and outputs of the four-warp cycle. Chain order is fixed:
//   forward_mid    = warp(begin,              begin_to_mid)
//   forward_end    = warp(forward_mid.frame,  mid_to_end)
//   backward_mid   = warp(forward_end.frame,  end_to_mid)
//   backward_begin = warp(backward_mid.frame, mid_to_begin)
struct CycleChain {
    Frame begin;
    Frame end;
    WarpResult forward_mid;
    WarpResult forward_end;
    WarpResult backward_mid;
    WarpResult backward_begin;
};

// Per-pixel validity weights in [0,1]; empty means all-valid. Photometric
// losses take a weighted mean so that hole pixels can be excluded.
using ValidityMask = std::vector<double>;

double l1_loss(const Frame& a, const Frame& b);
double l1_loss_masked(const Frame& a, const Frame& b, const ValidityMask& valid);
// Returns the loss and accumulates d/d(a) into grad_a (d/d(b) is its negation).
double l1_loss_backward(const Frame& a, const Frame& b, const ValidityMask& valid,
                        std::vector<double>& grad_a);

double smoothness_loss(const FlowField& flow);
double smoothness_loss_backward(const FlowField& flow, FlowGrad& grad);

// Fixed deterministic feature extractor: for pyramid levels 0,1,2 the
// box-downsampled channel-mean intensity and its gradient magnitude.
std::vector<Frame> perceptual_features(const Frame& frame);

double perceptual_loss(const Frame& a, const Frame& b);
double perceptual_loss_masked(const Frame& a, const Frame& b, const ValidityMask& valid);
double perceptual_loss_backward(const Frame& a, const Frame& b, const ValidityMask& valid,
                                std::vector<double>& grad_a);

double predictor_loss(const WarpResult& warped, const Frame& target, const FlowField& flow,
                      const PredictorLossWeights& w, bool exclude_holes = true);

// Loss plus its gradient with respect to the flow, chaining the photometric
// terms through the warp adjoint. `source` is the frame that was warped.
double predictor_loss_backward(const Frame& source, const WarpResult& warped,
                               const Frame& target, const FlowField& flow,
                               const PredictorLossWeights& w, bool exclude_holes,
                               FlowGrad& flow_grad);

double cycle_loss(const CycleChain& chain, const CycleLossWeights& w, bool exclude_holes = true);

}  // namespace motionflow
