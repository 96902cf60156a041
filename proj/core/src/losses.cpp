#include "motionflow/losses.hpp"

#include <cmath>
#include <cstring>

#include "motionflow/errors.hpp"

namespace motionflow {

namespace {

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Weighted mean absolute difference. `wts` is per-pixel (channels share a
// weight) or null for uniform weights. Optionally accumulates d/d(a) into
// grad_a scaled by `grad_scale`.
double weighted_l1(const Frame& a, const Frame& b, const double* wts,
                   std::vector<double>* grad_a, double grad_scale) {
    detail::require(a.same_shape(b), "l1 loss: shapes differ");
    const std::size_t npix = static_cast<std::size_t>(a.height) * a.width;
    const int ch = a.channels;

    double num = 0.0, den = 0.0;
    for (std::size_t p = 0; p < npix; ++p) {
        const double w = wts ? wts[p] : 1.0;
        den += w;
        if (w == 0.0) continue;
        for (int c = 0; c < ch; ++c)
            num += w * std::abs(a.data[p * ch + c] - b.data[p * ch + c]);
    }
    if (den == 0.0) return 0.0;
    const double loss = num / (den * ch);

    if (grad_a) {
        const double scale = grad_scale / (den * ch);
        for (std::size_t p = 0; p < npix; ++p) {
            const double w = wts ? wts[p] : 1.0;
            if (w == 0.0) continue;
            for (int c = 0; c < ch; ++c)
                (*grad_a)[p * ch + c] +=
                    scale * w * sign_of(a.data[p * ch + c] - b.data[p * ch + c]);
        }
    }
    return loss;
}

const double* mask_ptr(const ValidityMask& valid, const Frame& ref, const char* who) {
    if (valid.empty()) return nullptr;
    detail::require(valid.size() == static_cast<std::size_t>(ref.height) * ref.width,
                    std::string(who) + ": validity mask size differs");
    return valid.data();
}

Frame channel_mean(const Frame& frame) {
    if (frame.channels == 1) return frame;
    Frame out = make_frame(frame.height, frame.width, 1);
    const std::size_t npix = out.size();
    for (std::size_t p = 0; p < npix; ++p) {
        double s = 0.0;
        for (int c = 0; c < frame.channels; ++c) s += frame.data[p * frame.channels + c];
        out.data[p] = s / frame.channels;
    }
    return out;
}

// Gradient magnitude of a single-channel map; all zeros when the map is too
// small for finite differences.
Frame gradient_magnitude(const Frame& intensity, Frame* gx_out, Frame* gy_out) {
    Frame gm = make_frame(intensity.height, intensity.width, 1);
    if (intensity.height < 2 || intensity.width < 2) {
        if (gx_out) *gx_out = make_frame(intensity.height, intensity.width, 1);
        if (gy_out) *gy_out = make_frame(intensity.height, intensity.width, 1);
        return gm;
    }
    auto [gx, gy] = image_gradient(intensity);
    for (std::size_t i = 0; i < gm.data.size(); ++i)
        gm.data[i] = std::sqrt(gx.data[i] * gx.data[i] + gy.data[i] * gy.data[i]);
    if (gx_out) *gx_out = std::move(gx);
    if (gy_out) *gy_out = std::move(gy);
    return gm;
}

// Adjoint of image_gradient along one axis: scatters the stencil back.
void scatter_gradient_adjoint(const Frame& gsens_x, const Frame& gsens_y, Frame& out) {
    const int h = out.height, w = out.width;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double sx = gsens_x.at(y, x);
            if (sx != 0.0) {
                if (x == 0) {
                    out.at(y, 1) += sx;
                    out.at(y, 0) -= sx;
                } else if (x == w - 1) {
                    out.at(y, w - 1) += sx;
                    out.at(y, w - 2) -= sx;
                } else {
                    out.at(y, x + 1) += 0.5 * sx;
                    out.at(y, x - 1) -= 0.5 * sx;
                }
            }
            const double sy = gsens_y.at(y, x);
            if (sy != 0.0) {
                if (y == 0) {
                    out.at(1, x) += sy;
                    out.at(0, x) -= sy;
                } else if (y == h - 1) {
                    out.at(h - 1, x) += sy;
                    out.at(h - 2, x) -= sy;
                } else {
                    out.at(y + 1, x) += 0.5 * sy;
                    out.at(y - 1, x) -= 0.5 * sy;
                }
            }
        }
    }
}

// Adjoint of the box downsample: spreads each coarse sensitivity uniformly
// over its source block.
void scatter_downsample_adjoint(const Frame& coarse_sens, int factor, Frame& out) {
    if (factor == 1) {
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += coarse_sens.data[i];
        return;
    }
    for (int oy = 0; oy < coarse_sens.height; ++oy) {
        const int y0 = oy * factor;
        const int y1 = std::min(out.height, y0 + factor);
        for (int ox = 0; ox < coarse_sens.width; ++ox) {
            const int x0 = ox * factor;
            const int x1 = std::min(out.width, x0 + factor);
            const double share = coarse_sens.at(oy, ox) / ((y1 - y0) * (x1 - x0));
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) out.at(y, x) += share;
        }
    }
}

std::vector<double> downsample_mask(const ValidityMask& valid, int h, int w, int factor) {
    Frame tmp = make_frame(h, w, 1);
    tmp.data = valid;
    Frame small = downsample(tmp, factor);
    return small.data;
}

constexpr int kPerceptualLevels = 3;
constexpr int kPerceptualMaps = 2 * kPerceptualLevels;

}  // namespace

double l1_loss(const Frame& a, const Frame& b) {
    return weighted_l1(a, b, nullptr, nullptr, 0.0);
}

double l1_loss_masked(const Frame& a, const Frame& b, const ValidityMask& valid) {
    return weighted_l1(a, b, mask_ptr(valid, a, "l1_loss_masked"), nullptr, 0.0);
}

double l1_loss_backward(const Frame& a, const Frame& b, const ValidityMask& valid,
                        std::vector<double>& grad_a) {
    grad_a.assign(a.data.size(), 0.0);
    return weighted_l1(a, b, mask_ptr(valid, a, "l1_loss_backward"), &grad_a, 1.0);
}

double smoothness_loss(const FlowField& flow) {
    detail::require(flow.height >= 2 && flow.width >= 2, "smoothness_loss: field must be >= 2x2");
    Frame uf = make_frame(flow.height, flow.width, 1);
    uf.data = flow.u;
    Frame vf = make_frame(flow.height, flow.width, 1);
    vf.data = flow.v;
    auto [ux, uy] = image_gradient(uf);
    auto [vx, vy] = image_gradient(vf);
    double sum = 0.0;
    for (std::size_t i = 0; i < uf.data.size(); ++i)
        sum += std::abs(ux.data[i]) + std::abs(uy.data[i]) + std::abs(vx.data[i]) +
               std::abs(vy.data[i]);
    return sum / uf.data.size();
}

double smoothness_loss_backward(const FlowField& flow, FlowGrad& grad) {
    detail::require(flow.height >= 2 && flow.width >= 2,
                    "smoothness_loss_backward: field must be >= 2x2");
    const std::size_t npix = flow.u.size();
    grad.du.assign(npix, 0.0);
    grad.dv.assign(npix, 0.0);

    double sum = 0.0;
    const double scale = 1.0 / npix;
    for (int comp = 0; comp < 2; ++comp) {
        Frame f = make_frame(flow.height, flow.width, 1);
        f.data = comp == 0 ? flow.u : flow.v;
        auto [gx, gy] = image_gradient(f);
        Frame sx = make_frame(flow.height, flow.width, 1);
        Frame sy = make_frame(flow.height, flow.width, 1);
        for (std::size_t i = 0; i < npix; ++i) {
            sum += std::abs(gx.data[i]) + std::abs(gy.data[i]);
            sx.data[i] = scale * sign_of(gx.data[i]);
            sy.data[i] = scale * sign_of(gy.data[i]);
        }
        Frame acc = make_frame(flow.height, flow.width, 1);
        scatter_gradient_adjoint(sx, sy, acc);
        std::vector<double>& dst = comp == 0 ? grad.du : grad.dv;
        for (std::size_t i = 0; i < npix; ++i) dst[i] += acc.data[i];
    }
    return sum * scale;
}

std::vector<Frame> perceptual_features(const Frame& frame) {
    detail::require(frame.height >= 4 && frame.width >= 4,
                    "perceptual_features: input must be >= 4x4");
    std::vector<Frame> maps;
    maps.reserve(kPerceptualMaps);
    const Frame mean = channel_mean(frame);
    for (int level = 0; level < kPerceptualLevels; ++level) {
        Frame intensity = downsample(mean, 1 << level);
        Frame gm = gradient_magnitude(intensity, nullptr, nullptr);
        maps.push_back(std::move(intensity));
        maps.push_back(std::move(gm));
    }
    return maps;
}

namespace {

// Shared forward/backward walk over the feature pyramid. When grad_a is given
// it receives d(loss)/d(a) accumulated through intensity and gradient maps.
double perceptual_core(const Frame& a, const Frame& b, const ValidityMask& valid,
                       std::vector<double>* grad_a) {
    detail::require(a.same_shape(b), "perceptual loss: shapes differ");
    detail::require(a.height >= 4 && a.width >= 4, "perceptual loss: input must be >= 4x4");
    mask_ptr(valid, a, "perceptual loss");

    const Frame mean_a = channel_mean(a);
    const Frame mean_b = channel_mean(b);
    if (grad_a) grad_a->assign(a.data.size(), 0.0);

    double total = 0.0;
    for (int level = 0; level < kPerceptualLevels; ++level) {
        const int factor = 1 << level;
        Frame ia = downsample(mean_a, factor);
        Frame ib = downsample(mean_b, factor);
        std::vector<double> level_mask;
        const double* wts = nullptr;
        if (!valid.empty()) {
            level_mask = downsample_mask(valid, a.height, a.width, factor);
            wts = level_mask.data();
        }

        // Sensitivity w.r.t. this level's intensity map, fed by both the
        // intensity term and the gradient-magnitude term.
        Frame isens = make_frame(ia.height, ia.width, 1);

        if (grad_a) {
            std::vector<double> g(ia.data.size(), 0.0);
            total += weighted_l1(ia, ib, wts, &g, 1.0 / kPerceptualMaps) / kPerceptualMaps;
            for (std::size_t i = 0; i < g.size(); ++i) isens.data[i] += g[i];
        } else {
            total += weighted_l1(ia, ib, wts, nullptr, 0.0) / kPerceptualMaps;
        }

        Frame gxa, gya;
        Frame ga = gradient_magnitude(ia, &gxa, &gya);
        Frame gb = gradient_magnitude(ib, nullptr, nullptr);
        if (grad_a) {
            std::vector<double> g(ga.data.size(), 0.0);
            total += weighted_l1(ga, gb, wts, &g, 1.0 / kPerceptualMaps) / kPerceptualMaps;
            Frame sx = make_frame(ia.height, ia.width, 1);
            Frame sy = make_frame(ia.height, ia.width, 1);
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (ga.data[i] > 0.0 && g[i] != 0.0) {
                    sx.data[i] = g[i] * gxa.data[i] / ga.data[i];
                    sy.data[i] = g[i] * gya.data[i] / ga.data[i];
                }
            }
            if (ia.height >= 2 && ia.width >= 2) scatter_gradient_adjoint(sx, sy, isens);

            Frame full = make_frame(a.height, a.width, 1);
            scatter_downsample_adjoint(isens, factor, full);
            const double per_ch = 1.0 / a.channels;
            for (std::size_t p = 0; p < full.data.size(); ++p)
                for (int c = 0; c < a.channels; ++c)
                    (*grad_a)[p * a.channels + c] += full.data[p] * per_ch;
        } else {
            total += weighted_l1(ga, gb, wts, nullptr, 0.0) / kPerceptualMaps;
        }
    }
    return total;
}

}  // namespace

double perceptual_loss(const Frame& a, const Frame& b) {
    return perceptual_core(a, b, {}, nullptr);
}

double perceptual_loss_masked(const Frame& a, const Frame& b, const ValidityMask& valid) {
    return perceptual_core(a, b, valid, nullptr);
}

double perceptual_loss_backward(const Frame& a, const Frame& b, const ValidityMask& valid,
                                std::vector<double>& grad_a) {
    return perceptual_core(a, b, valid, &grad_a);
}

namespace {

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

bool perceptual_applicable(const Frame& f) { return f.height >= 4 && f.width >= 4; }
bool smoothness_applicable(const FlowField& f) { return f.height >= 2 && f.width >= 2; }

}  // namespace

double predictor_loss(const WarpResult& warped, const Frame& target, const FlowField& flow,
                      const PredictorLossWeights& w, bool exclude_holes) {
    detail::require(warped.frame.same_shape(target), "predictor_loss: shapes differ");
    ValidityMask valid;
    if (exclude_holes) valid = holes_to_validity(warped.hole_mask);

    double loss = w.l1 * l1_loss_masked(warped.frame, target, valid);
    // Terms that need finite differences drop out on maps too small for their
    // stencils; the coarsest pyramid levels hit this.
    if (w.perceptual != 0.0 && perceptual_applicable(target))
        loss += w.perceptual * perceptual_loss_masked(warped.frame, target, valid);
    if (w.smooth != 0.0 && smoothness_applicable(flow))
        loss += w.smooth * smoothness_loss(flow);
    return loss;
}

double predictor_loss_backward(const Frame& source, const WarpResult& warped,
                               const Frame& target, const FlowField& flow,
                               const PredictorLossWeights& w, bool exclude_holes,
                               FlowGrad& flow_grad) {
    detail::require(warped.frame.same_shape(target), "predictor_loss_backward: shapes differ");
    detail::require(source.same_shape(target), "predictor_loss_backward: source shape differs");
    ValidityMask valid;
    if (exclude_holes) valid = holes_to_validity(warped.hole_mask);

    std::vector<double> upstream(target.data.size(), 0.0);
    std::vector<double> g;
    double loss = w.l1 * l1_loss_backward(warped.frame, target, valid, g);
    for (std::size_t i = 0; i < upstream.size(); ++i) upstream[i] += w.l1 * g[i];

    if (w.perceptual != 0.0 && perceptual_applicable(target)) {
        loss += w.perceptual * perceptual_loss_backward(warped.frame, target, valid, g);
        for (std::size_t i = 0; i < upstream.size(); ++i) upstream[i] += w.perceptual * g[i];
    }

    warp_backward(source, flow, warped, upstream, nullptr, &flow_grad);

    if (w.smooth != 0.0 && smoothness_applicable(flow)) {
        FlowGrad sg;
        loss += w.smooth * smoothness_loss_backward(flow, sg);
        for (std::size_t i = 0; i < flow_grad.du.size(); ++i) {
            flow_grad.du[i] += w.smooth * sg.du[i];
            flow_grad.dv[i] += w.smooth * sg.dv[i];
        }
    }
    return loss;
}

double cycle_loss(const CycleChain& chain, const CycleLossWeights& w, bool exclude_holes) {
    ValidityMask v_begin, v_mid, v_end;
    if (exclude_holes) {
        v_begin = holes_to_validity(chain.backward_begin.hole_mask);
        v_mid = joint_validity(chain.forward_mid.hole_mask, chain.backward_mid.hole_mask);
        v_end = holes_to_validity(chain.forward_end.hole_mask);
    }

    double loss = w.endpoint0 * l1_loss_masked(chain.backward_begin.frame, chain.begin, v_begin) +
                  w.intermediate *
                      l1_loss_masked(chain.forward_mid.frame, chain.backward_mid.frame, v_mid) +
                  w.endpoint1 * l1_loss_masked(chain.forward_end.frame, chain.end, v_end);
    if (w.perceptual != 0.0 && perceptual_applicable(chain.begin)) {
        loss += w.perceptual *
                (perceptual_loss_masked(chain.backward_begin.frame, chain.begin, v_begin) +
                 perceptual_loss_masked(chain.forward_mid.frame, chain.backward_mid.frame, v_mid) +
                 perceptual_loss_masked(chain.forward_end.frame, chain.end, v_end));
    }
    return loss;
}

}  // namespace motionflow
