#pragma once

#include <map>
#include <utility>

#include "motionflow/image.hpp"

namespace motionflow {

struct SegScore {
    std::map<int, double> per_class_iou;
    std::map<int, double> per_class_dice;
    double mean_iou = 0.0;
    double mean_dice = 0.0;
};

// Per-class IoU and Dice over classes >= 1. Classes absent from both masks are
// excluded from the means; a class present on only one side scores 0. With no
// foreground class anywhere both masks are all background, which counts as
// perfect agreement.
SegScore segmentation_score(const LabelMask& pred, const LabelMask& gt, int num_classes);

// Mean and max Euclidean distance between flow vectors.
std::pair<double, double> endpoint_error(const FlowField& flow, const FlowField& gt);

// 10 log10(1/MSE) for unit-range frames; +infinity for identical frames.
double psnr(const Frame& a, const Frame& b);

}  // namespace motionflow
