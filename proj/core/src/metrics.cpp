#include "motionflow/metrics.hpp"

#include <cmath>
#include <limits>

#include "motionflow/errors.hpp"

namespace motionflow {

SegScore segmentation_score(const LabelMask& pred, const LabelMask& gt, int num_classes) {
    detail::require(pred.same_shape(gt), "segmentation_score: shapes differ");
    detail::require(num_classes >= 1, "segmentation_score: num_classes must be >= 1");

    std::vector<long> inter(num_classes, 0), uni(num_classes, 0);
    for (std::size_t i = 0; i < pred.ids.size(); ++i) {
        const std::int32_t p = pred.ids[i];
        const std::int32_t g = gt.ids[i];
        detail::require(p >= 0 && p < num_classes && g >= 0 && g < num_classes,
                        "segmentation_score: class id out of range");
        if (p == g && p != 0) ++inter[p];
        if (p != 0) ++uni[p];
        if (g != 0 && g != p) ++uni[g];
    }

    SegScore score;
    double iou_sum = 0.0, dice_sum = 0.0;
    int counted = 0;
    for (int c = 1; c < num_classes; ++c) {
        if (uni[c] == 0) continue; // absent from both masks
        const double iou = static_cast<double>(inter[c]) / uni[c];
        const double dice = 2.0 * iou / (1.0 + iou);
        score.per_class_iou[c] = iou;
        score.per_class_dice[c] = dice;
        iou_sum += iou;
        dice_sum += dice;
        ++counted;
    }
    if (counted == 0) {
        // Both masks are pure background, which is perfect agreement.
        score.mean_iou = 1.0;
        score.mean_dice = 1.0;
    } else {
        score.mean_iou = iou_sum / counted;
        score.mean_dice = dice_sum / counted;
    }
    return score;
}

std::pair<double, double> endpoint_error(const FlowField& flow, const FlowField& gt) {
    detail::require(flow.same_shape(gt), "endpoint_error: shapes differ");
    double sum = 0.0, worst = 0.0;
    for (std::size_t i = 0; i < flow.u.size(); ++i) {
        const double du = flow.u[i] - gt.u[i];
        const double dv = flow.v[i] - gt.v[i];
        const double e = std::sqrt(du * du + dv * dv);
        sum += e;
        worst = std::max(worst, e);
    }
    return {sum / flow.u.size(), worst};
}

double psnr(const Frame& a, const Frame& b) {
    detail::require(a.same_shape(b), "psnr: shapes differ");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= a.data.size();
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

}  // namespace motionflow
