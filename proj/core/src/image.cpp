#include "motionflow/image.hpp"

#include <algorithm>
#include <cmath>

#include "motionflow/errors.hpp"

namespace motionflow {

Frame make_frame(int height, int width, int channels, double fill) {
    detail::require(height >= 1 && width >= 1, "make_frame: dims must be positive");
    detail::require(channels == 1 || channels == 3, "make_frame: channels must be 1 or 3");
    Frame f;
    f.height = height;
    f.width = width;
    f.channels = channels;
    f.data.assign(static_cast<std::size_t>(height) * width * channels, fill);
    return f;
}

FlowField make_flow(int height, int width, double fill_u, double fill_v) {
    detail::require(height >= 1 && width >= 1, "make_flow: dims must be positive");
    FlowField f;
    f.height = height;
    f.width = width;
    f.u.assign(static_cast<std::size_t>(height) * width, fill_u);
    f.v.assign(static_cast<std::size_t>(height) * width, fill_v);
    return f;
}

LabelMask make_mask(int height, int width, std::int32_t fill) {
    detail::require(height >= 1 && width >= 1, "make_mask: dims must be positive");
    LabelMask m;
    m.height = height;
    m.width = width;
    m.ids.assign(static_cast<std::size_t>(height) * width, fill);
    return m;
}

Frame downsample(const Frame& frame, int factor) {
    detail::require(factor >= 1, "downsample: factor must be >= 1");
    detail::require((factor & (factor - 1)) == 0, "downsample: factor must be a power of two");
    if (factor == 1) return frame;

    const int out_h = (frame.height + factor - 1) / factor;
    const int out_w = (frame.width + factor - 1) / factor;
    Frame out = make_frame(out_h, out_w, frame.channels);
    for (int oy = 0; oy < out_h; ++oy) {
        const int y0 = oy * factor;
        const int y1 = std::min(frame.height, y0 + factor);
        for (int ox = 0; ox < out_w; ++ox) {
            const int x0 = ox * factor;
            const int x1 = std::min(frame.width, x0 + factor);
            const double count = static_cast<double>(y1 - y0) * (x1 - x0);
            for (int c = 0; c < frame.channels; ++c) {
                double sum = 0.0;
                for (int y = y0; y < y1; ++y)
                    for (int x = x0; x < x1; ++x) sum += frame.at(y, x, c);
                out.at(oy, ox, c) = sum / count;
            }
        }
    }
    return out;
}

namespace {

double bilinear_sample(const std::vector<double>& v, int h, int w, double y, double x) {
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    const int x0 = std::min(static_cast<int>(x), w - 1);
    const int y0 = std::min(static_cast<int>(y), h - 1);
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = v[static_cast<std::size_t>(y0) * w + x0] * (1.0 - fx) +
                       v[static_cast<std::size_t>(y0) * w + x1] * fx;
    const double bot = v[static_cast<std::size_t>(y1) * w + x0] * (1.0 - fx) +
                       v[static_cast<std::size_t>(y1) * w + x1] * fx;
    return top * (1.0 - fy) + bot * fy;
}

}  // namespace

FlowField resize_flow(const FlowField& flow, int new_h, int new_w) {
    detail::require(new_h >= 1 && new_w >= 1, "resize_flow: target dims must be >= 1");
    if (new_h == flow.height && new_w == flow.width) return flow;

    const double scale_u = static_cast<double>(new_w) / flow.width;
    const double scale_v = static_cast<double>(new_h) / flow.height;
    FlowField out = make_flow(new_h, new_w);
    for (int y = 0; y < new_h; ++y) {
        // pixel-center aligned source coordinates
        const double sy = (y + 0.5) / scale_v - 0.5;
        for (int x = 0; x < new_w; ++x) {
            const double sx = (x + 0.5) / scale_u - 0.5;
            const std::size_t i = out.index(y, x);
            out.u[i] = bilinear_sample(flow.u, flow.height, flow.width, sy, sx) * scale_u;
            out.v[i] = bilinear_sample(flow.v, flow.height, flow.width, sy, sx) * scale_v;
        }
    }
    return out;
}

std::pair<Frame, Frame> image_gradient(const Frame& frame) {
    detail::require(frame.height >= 2 && frame.width >= 2, "image_gradient: dims must be >= 2x2");
    Frame gx = make_frame(frame.height, frame.width, frame.channels);
    Frame gy = make_frame(frame.height, frame.width, frame.channels);
    const int h = frame.height, w = frame.width;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < frame.channels; ++c) {
                if (x == 0)
                    gx.at(y, x, c) = frame.at(y, 1, c) - frame.at(y, 0, c);
                else if (x == w - 1)
                    gx.at(y, x, c) = frame.at(y, w - 1, c) - frame.at(y, w - 2, c);
                else
                    gx.at(y, x, c) = 0.5 * (frame.at(y, x + 1, c) - frame.at(y, x - 1, c));

                if (y == 0)
                    gy.at(y, x, c) = frame.at(1, x, c) - frame.at(0, x, c);
                else if (y == h - 1)
                    gy.at(y, x, c) = frame.at(h - 1, x, c) - frame.at(h - 2, x, c);
                else
                    gy.at(y, x, c) = 0.5 * (frame.at(y + 1, x, c) - frame.at(y - 1, x, c));
            }
        }
    }
    return {std::move(gx), std::move(gy)};
}

}  // namespace motionflow
