#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "motionflow/io.hpp"

namespace motionflow {

// Exit codes shared by every command: 0 success, 2 input error, 3 pipeline
// error, 4 numerical failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 2;
inline constexpr int kExitPipelineError = 3;
inline constexpr int kExitNumericalFailure = 4;

// Optional flag overrides applied on top of manifest values and defaults.
struct ConfigOverrides {
    std::optional<int> levels;
    std::optional<int> iters;
    std::optional<double> step;
    std::optional<double> lambda_l1;
    std::optional<double> lambda_perceptual;
    std::optional<double> lambda_smooth;
    std::optional<std::vector<double>> cycle_lambdas; // endpoint0, intermediate, endpoint1, perceptual
    std::optional<int> max_step;                      // cap on |k| during propagation
    std::optional<int> interval;                      // labeling stride override
    std::optional<int> threads;
};

int cmd_synth(const std::filesystem::path& spec_path, const std::filesystem::path& out_dir,
              std::uint64_t seed);

int cmd_estimate_flow(const std::filesystem::path& manifest_path, int t,
                      const std::filesystem::path& out_path, const ConfigOverrides& overrides = {});

int cmd_rearrange(const std::filesystem::path& manifest_path, const std::filesystem::path& out_dir,
                  const ConfigOverrides& overrides = {});

int cmd_evaluate(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                 int num_classes);

// Full argv-style entry point used by the CLI binary and by tests. argv[0] is
// the first real argument (no program name).
int run_cli(const std::vector<std::string>& args);

}  // namespace motionflow
