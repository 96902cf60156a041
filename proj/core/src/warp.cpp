#include "motionflow/warp.hpp"

#include <cmath>

#include "motionflow/errors.hpp"

namespace motionflow {

namespace {

struct Corner {
    int x, y;
    double w;
    double dw_dfx; // d(w)/d(fractional x), and dfx/du == 1
    double dw_dfy;
};

// Bilinear footprint of a displaced source pixel. Returns the number of
// in-bounds corners written to `out` (0 when the target lands outside or the
// flow is non-finite).
int footprint(double tx, double ty, int width, int height, Corner out[4]) {
    if (!(tx > -1.0 && tx < width && ty > -1.0 && ty < height)) return 0;
    const double fx0 = std::floor(tx);
    const double fy0 = std::floor(ty);
    const int x0 = static_cast<int>(fx0);
    const int y0 = static_cast<int>(fy0);
    const double fx = tx - fx0;
    const double fy = ty - fy0;

    const Corner all[4] = {
        {x0, y0, (1.0 - fx) * (1.0 - fy), -(1.0 - fy), -(1.0 - fx)},
        {x0 + 1, y0, fx * (1.0 - fy), (1.0 - fy), -fx},
        {x0, y0 + 1, (1.0 - fx) * fy, -fy, (1.0 - fx)},
        {x0 + 1, y0 + 1, fx * fy, fy, fx},
    };
    int n = 0;
    for (const Corner& c : all) {
        if (c.x >= 0 && c.x < width && c.y >= 0 && c.y < height) out[n++] = c;
    }
    return n;
}

void check_pair(const Frame& frame, const FlowField& flow, const char* who) {
    detail::require(frame.height == flow.height && frame.width == flow.width,
                    std::string(who) + ": frame and flow shapes differ");
    detail::require(frame.height >= 1 && frame.width >= 1,
                    std::string(who) + ": empty input");
}

}  // namespace

WarpResult forward_warp(const Frame& frame, const FlowField& flow) {
    check_pair(frame, flow, "forward_warp");
    const int h = frame.height, w = frame.width, ch = frame.channels;

    WarpResult res;
    res.frame = make_frame(h, w, ch);
    res.weights.assign(static_cast<std::size_t>(h) * w, 0.0);
    res.hole_mask.assign(static_cast<std::size_t>(h) * w, 0);

    std::vector<double> accum(static_cast<std::size_t>(h) * w * ch, 0.0);
    Corner corners[4];
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t s = flow.index(y, x);
            const int n = footprint(x + flow.u[s], y + flow.v[s], w, h, corners);
            for (int k = 0; k < n; ++k) {
                const Corner& c = corners[k];
                const std::size_t p = static_cast<std::size_t>(c.y) * w + c.x;
                res.weights[p] += c.w;
                for (int cc = 0; cc < ch; ++cc)
                    accum[p * ch + cc] += frame.at(y, x, cc) * c.w;
            }
        }
    }

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t p = static_cast<std::size_t>(y) * w + x;
            if (res.weights[p] < kWarpWeightEpsilon) {
                res.hole_mask[p] = 1;
                for (int cc = 0; cc < ch; ++cc) res.frame.at(y, x, cc) = frame.at(y, x, cc);
            } else {
                for (int cc = 0; cc < ch; ++cc)
                    res.frame.at(y, x, cc) = accum[p * ch + cc] / res.weights[p];
            }
        }
    }
    return res;
}

LabelMask forward_warp_labels(const LabelMask& mask, const FlowField& flow, int num_classes) {
    detail::require(mask.height == flow.height && mask.width == flow.width,
                    "forward_warp_labels: mask and flow shapes differ");
    detail::require(num_classes >= 1, "forward_warp_labels: num_classes must be >= 1");
    const int h = mask.height, w = mask.width;

    std::vector<double> score(static_cast<std::size_t>(h) * w * num_classes, 0.0);
    Corner corners[4];
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::int32_t id = mask.at(y, x);
            detail::require(id >= 0 && id < num_classes,
                            "forward_warp_labels: class id out of range");
            const std::size_t s = flow.index(y, x);
            const int n = footprint(x + flow.u[s], y + flow.v[s], w, h, corners);
            for (int k = 0; k < n; ++k) {
                const Corner& c = corners[k];
                const std::size_t p = static_cast<std::size_t>(c.y) * w + c.x;
                score[p * num_classes + id] += c.w;
            }
        }
    }

    LabelMask out = make_mask(h, w);
    for (std::size_t p = 0; p < static_cast<std::size_t>(h) * w; ++p) {
        double total = 0.0;
        for (int c = 0; c < num_classes; ++c) total += score[p * num_classes + c];
        if (total < kWarpWeightEpsilon) {
            out.ids[p] = 0;
            continue;
        }
        int best = 0;
        double best_w = score[p * num_classes];
        for (int c = 1; c < num_classes; ++c) {
            if (score[p * num_classes + c] > best_w) {
                best_w = score[p * num_classes + c];
                best = c;
            }
        }
        out.ids[p] = best;
    }
    return out;
}

void warp_backward(const Frame& frame, const FlowField& flow, const WarpResult& warped,
                   const std::vector<double>& upstream,
                   std::vector<double>* frame_grad, FlowGrad* flow_grad) {
    check_pair(frame, flow, "warp_backward");
    detail::require(warped.frame.same_shape(frame), "warp_backward: warped shape differs");
    detail::require(upstream.size() == frame.data.size(),
                    "warp_backward: upstream size differs");
    const int h = frame.height, w = frame.width, ch = frame.channels;
    const std::size_t npix = static_cast<std::size_t>(h) * w;

    if (frame_grad) frame_grad->assign(npix * ch, 0.0);
    if (flow_grad) {
        flow_grad->du.assign(npix, 0.0);
        flow_grad->dv.assign(npix, 0.0);
    }

    // Hole pixels copy the source value, so their upstream flows straight to
    // the source frame and never through the splat.
    if (frame_grad) {
        for (std::size_t p = 0; p < npix; ++p) {
            if (!warped.hole_mask[p]) continue;
            for (int cc = 0; cc < ch; ++cc) (*frame_grad)[p * ch + cc] += upstream[p * ch + cc];
        }
    }

    Corner corners[4];
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t s = flow.index(y, x);
            const int n = footprint(x + flow.u[s], y + flow.v[s], w, h, corners);
            double du = 0.0, dv = 0.0;
            for (int k = 0; k < n; ++k) {
                const Corner& c = corners[k];
                const std::size_t p = static_cast<std::size_t>(c.y) * w + c.x;
                if (warped.hole_mask[p]) continue;
                const double inv_w = 1.0 / warped.weights[p];
                double spread = 0.0; // d(loss)/d(weight contribution at p)
                for (int cc = 0; cc < ch; ++cc) {
                    const double g = upstream[p * ch + cc] * inv_w;
                    if (frame_grad) (*frame_grad)[s * ch + cc] += g * c.w;
                    spread += g * (frame.at(y, x, cc) - warped.frame.data[p * ch + cc]);
                }
                du += c.dw_dfx * spread;
                dv += c.dw_dfy * spread;
            }
            if (flow_grad) {
                flow_grad->du[s] = du;
                flow_grad->dv[s] = dv;
            }
        }
    }
}

FlowGrad warp_flow_gradient(const Frame& frame, const FlowField& flow,
                            const std::vector<double>& upstream) {
    const WarpResult warped = forward_warp(frame, flow);
    FlowGrad g;
    warp_backward(frame, flow, warped, upstream, nullptr, &g);
    return g;
}

}  // namespace motionflow
