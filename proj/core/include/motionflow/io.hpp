#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "motionflow/cycle.hpp"
#include "motionflow/flow_estimator.hpp"
#include "motionflow/image.hpp"
#include "motionflow/propagation.hpp"
#include "motionflow/synth.hpp"

namespace motionflow {

// 8-bit PNG round trips: frames quantize to round(v * 255), masks store raw
// class ids in a single gray channel.
void write_frame_png(const std::filesystem::path& path, const Frame& frame);
Frame read_frame_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const LabelMask& mask);
LabelMask read_mask_png(const std::filesystem::path& path);

// Binary flow format: magic "MFLO", u32 version = 1, u32 width, u32 height,
// then height*width little-endian f32 (u, v) pairs, row-major.
void write_flow(const std::filesystem::path& path, const FlowField& flow);
FlowField read_flow(const std::filesystem::path& path);

// Sequence description consumed by the pipeline commands. Paths are resolved
// relative to the manifest file's directory.
struct Manifest {
    std::filesystem::path dir;
    std::string frame_pattern = "frame_%05d.png";
    std::string mask_pattern = "mask_%05d.png";
    int num_frames = 0;
    int interval = 4;
    int num_classes = 2;
    EstimatorConfig estimator;
    CompensatorConfig compensator;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

// Fills a printf-style %0Nd pattern with the frame index.
std::string format_index(const std::string& pattern, int index);

// Loads the sparse sequence the manifest describes: all frames, masks at the
// labeled stride only.
SparseSequence load_sequence(const Manifest& manifest, const std::filesystem::path& manifest_dir);

SceneSpec read_scene_spec(const std::filesystem::path& path);

}  // namespace motionflow
