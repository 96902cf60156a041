#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "motionflow/image.hpp"

namespace motionflow {

enum class ShapeKind { polygon, ellipse };

// One rigidly moving textured shape. Position at time t: centroid displaced by
// t * velocity, geometry rotated by t * spin_deg about the centroid.
struct ShapeSpec {
    ShapeKind kind = ShapeKind::polygon;
    std::vector<std::array<double, 2>> vertices; // polygon, in pixel coordinates
    std::array<double, 2> center = {0.0, 0.0};   // ellipse
    std::array<double, 2> radii = {1.0, 1.0};    // ellipse
    double angle_deg = 0.0;                      // ellipse base orientation
    int class_id = 1;
    std::array<double, 2> velocity = {0.0, 0.0}; // px/frame
    double spin_deg = 0.0;                       // deg/frame about the centroid
    std::uint64_t texture_seed = 1;
};

// Deterministic scene: procedural textured background (optionally drifting)
// plus rigidly moving textured shapes with exact analytic flows and masks.
struct SceneSpec {
    int width = 64;
    int height = 64;
    int num_frames = 2;
    std::uint64_t background_seed = 0;
    std::array<double, 2> background_drift = {0.0, 0.0}; // px/frame
    double noise_sigma = 0.0;
    int interval = 4; // labeling interval carried into the manifest
    std::vector<ShapeSpec> shapes;
};

int scene_num_classes(const SceneSpec& spec);

// Anti-aliased rasterization (4x4 supersampling) of frames plus crisp masks
// from pixel-center geometry. Bitwise deterministic for fixed spec and seed.
std::pair<std::vector<Frame>, std::vector<LabelMask>> render_sequence(const SceneSpec& spec,
                                                                      std::uint64_t seed);

// Renders the scene at an arbitrary fractional time (no noise). Useful as a
// ground-truth intermediate frame.
Frame render_at_time(const SceneSpec& spec, double t);
LabelMask mask_at_time(const SceneSpec& spec, double t);

// Exact per-pixel displacement from frame t to t+1: rigid-motion field inside
// each shape, background drift elsewhere.
FlowField ground_truth_flow(const SceneSpec& spec, int t);

}  // namespace motionflow
