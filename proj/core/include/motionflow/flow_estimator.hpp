#pragma once

#include <utility>
#include <vector>

#include "motionflow/image.hpp"
#include "motionflow/losses.hpp"

namespace motionflow {

struct EstimatorConfig {
    int pyramid_levels = 4;
    int iters_per_level = 200;
    double step_size = 0.05;      // initial step, in pixels of flow change
    double step_decay = 0.5;      // multiplier applied when a step fails to decrease the loss
    double convergence_tol = 1e-5; // relative loss change below which a level stops
    PredictorLossWeights weights;
    bool exclude_holes = true;
};

struct EstimateResult {
    FlowField flow;
    double final_loss = 0.0;
    // Accepted-step loss values per pyramid level, coarsest first. Each trace
    // starts with the level's initial loss and is non-increasing.
    std::vector<std::vector<double>> level_traces;
};

// Coarse-to-fine minimization of the predictor loss over a per-pixel flow
// field, starting from zero flow at the coarsest level. Deterministic for
// fixed inputs and config.
EstimateResult estimate_flow(const Frame& src, const Frame& dst, const EstimatorConfig& cfg);

// Two independent estimates with the arguments swapped.
std::pair<EstimateResult, EstimateResult> estimate_bidirectional(const Frame& a, const Frame& b,
                                                                 const EstimatorConfig& cfg);

}  // namespace motionflow
