#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace motionflow {

// Multi-channel raster, row-major and channel-interleaved. Intensities are
// real-valued in [0,1] for anything that represents an actual image; derived
// rasters (gradients, feature maps) reuse the container without that range.
struct Frame {
    int height = 0;
    int width = 0;
    int channels = 1;
    std::vector<double> data;

    double& at(int y, int x, int c = 0) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c = 0) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::size_t size() const { return data.size(); }
    bool same_shape(const Frame& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

// Per-pixel displacement field. (u, v) maps source pixel (x, y) to
// (x + u, y + v); x grows rightward, y downward, origin at the top left.
struct FlowField {
    int height = 0;
    int width = 0;
    std::vector<double> u;
    std::vector<double> v;

    std::size_t index(int y, int x) const { return static_cast<std::size_t>(y) * width + x; }
    bool same_shape(const FlowField& o) const { return height == o.height && width == o.width; }
};

// Per-pixel integer class ids, 0 = background.
struct LabelMask {
    int height = 0;
    int width = 0;
    std::vector<std::int32_t> ids;

    std::int32_t& at(int y, int x) { return ids[static_cast<std::size_t>(y) * width + x]; }
    std::int32_t at(int y, int x) const { return ids[static_cast<std::size_t>(y) * width + x]; }
    bool same_shape(const LabelMask& o) const { return height == o.height && width == o.width; }
};

Frame make_frame(int height, int width, int channels, double fill = 0.0);
FlowField make_flow(int height, int width, double fill_u = 0.0, double fill_v = 0.0);
LabelMask make_mask(int height, int width, std::int32_t fill = 0);

// Box average over factor x factor blocks; ragged edge blocks average the
// cells that exist. factor must be a power of two.
Frame downsample(const Frame& frame, int factor);

// Bilinear resampling of both components, with displacements rescaled into
// destination-pixel units.
FlowField resize_flow(const FlowField& flow, int new_h, int new_w);

// Central differences in the interior, one-sided at the borders.
std::pair<Frame, Frame> image_gradient(const Frame& frame);

}  // namespace motionflow
