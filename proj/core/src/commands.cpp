#include "motionflow/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "motionflow/errors.hpp"
#include "motionflow/metrics.hpp"
#include "motionflow/propagation.hpp"
#include "motionflow/synth.hpp"

namespace motionflow {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

int guard(const std::function<int()>& body) {
    try {
        return body();
    } catch (const NumericalFailure& e) {
        std::cerr << "numerical failure: " << e.what() << " (level " << e.level << ", iteration "
                  << e.iteration << ")\n";
        return kExitNumericalFailure;
    } catch (const PipelineError& e) {
        std::cerr << "pipeline error: " << e.what() << "\n";
        return kExitPipelineError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    }
}

void apply_estimator_overrides(EstimatorConfig& cfg, const ConfigOverrides& ov) {
    if (ov.levels) cfg.pyramid_levels = *ov.levels;
    if (ov.iters) cfg.iters_per_level = *ov.iters;
    if (ov.step) cfg.step_size = *ov.step;
    if (ov.lambda_l1) cfg.weights.l1 = *ov.lambda_l1;
    if (ov.lambda_perceptual) cfg.weights.perceptual = *ov.lambda_perceptual;
    if (ov.lambda_smooth) cfg.weights.smooth = *ov.lambda_smooth;
}

void apply_compensator_overrides(CompensatorConfig& cfg, const ConfigOverrides& ov) {
    if (ov.cycle_lambdas) {
        detail::require(ov.cycle_lambdas->size() == 4,
                        "cycle lambdas need four values: endpoint0 intermediate endpoint1 "
                        "perceptual");
        cfg.weights.endpoint0 = (*ov.cycle_lambdas)[0];
        cfg.weights.intermediate = (*ov.cycle_lambdas)[1];
        cfg.weights.endpoint1 = (*ov.cycle_lambdas)[2];
        cfg.weights.perceptual = (*ov.cycle_lambdas)[3];
    }
}

int resolve_threads(const ConfigOverrides& ov) {
    if (ov.threads) {
        detail::require(*ov.threads >= 1, "threads must be >= 1");
        return *ov.threads;
    }
    if (const char* env = std::getenv("MOTIONFLOW_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end && *end == '\0' && n >= 1) return static_cast<int>(n);
    }
    return 1;
}

json pair_to_json(const PropagatedPair& pair, const std::string& frame_file,
                  const std::string& mask_file) {
    return json{{"frame", frame_file},
                {"mask", mask_file},
                {"source_index", pair.source_index},
                {"target_index", pair.target_index},
                {"step", pair.step},
                {"time", pair.time},
                {"provenance", provenance_name(pair.provenance)}};
}

// Writes one output set into its own subdirectory, file names keyed by the
// pair's temporal slot.
json write_set(const fs::path& out_dir, const std::string& set_name,
               const std::vector<PropagatedPair>& pairs) {
    const fs::path dir = out_dir / set_name;
    fs::create_directories(dir);
    json entries = json::array();
    for (const PropagatedPair& pair : pairs) {
        const std::string frame_file = format_index("frame_%05d.png", pair.target_index);
        const std::string mask_file = format_index("mask_%05d.png", pair.target_index);
        write_frame_png(dir / frame_file, pair.frame);
        write_mask_png(dir / mask_file, pair.label);
        entries.push_back(pair_to_json(pair, set_name + "/" + frame_file,
                                       set_name + "/" + mask_file));
    }
    return entries;
}

}  // namespace

int cmd_synth(const std::filesystem::path& spec_path, const std::filesystem::path& out_dir,
              std::uint64_t seed) {
    return guard([&] {
        const SceneSpec spec = read_scene_spec(spec_path);
        auto [frames, masks] = render_sequence(spec, seed);
        fs::create_directories(out_dir);

        Manifest manifest;
        manifest.dir = ".";
        manifest.num_frames = spec.num_frames;
        manifest.interval = spec.interval;
        manifest.num_classes = scene_num_classes(spec);
        for (int i = 0; i < spec.num_frames; ++i) {
            write_frame_png(out_dir / format_index(manifest.frame_pattern, i), frames[i]);
            write_mask_png(out_dir / format_index(manifest.mask_pattern, i), masks[i]);
        }
        for (int i = 0; i + 1 < spec.num_frames; ++i)
            write_flow(out_dir / format_index("flow_%05d.mflo", i), ground_truth_flow(spec, i));
        write_manifest(out_dir / "manifest.json", manifest);
        std::cout << "wrote " << spec.num_frames << " frames to " << out_dir.string() << "\n";
        return kExitOk;
    });
}

int cmd_estimate_flow(const std::filesystem::path& manifest_path, int t,
                      const std::filesystem::path& out_path, const ConfigOverrides& overrides) {
    return guard([&] {
        Manifest manifest = read_manifest(manifest_path);
        detail::require(t >= 0 && t + 1 < manifest.num_frames,
                        "frame index t must satisfy 0 <= t < num_frames - 1");
        EstimatorConfig cfg = manifest.estimator;
        apply_estimator_overrides(cfg, overrides);

        const fs::path base = manifest_path.parent_path() / manifest.dir;
        const Frame src = read_frame_png(base / format_index(manifest.frame_pattern, t));
        const Frame dst = read_frame_png(base / format_index(manifest.frame_pattern, t + 1));
        const EstimateResult res = estimate_flow(src, dst, cfg);
        write_flow(out_path, res.flow);
        std::cout << "flow " << t << " -> " << t + 1 << ": final loss " << res.final_loss << "\n";
        return kExitOk;
    });
}

int cmd_rearrange(const std::filesystem::path& manifest_path, const std::filesystem::path& out_dir,
                  const ConfigOverrides& overrides) {
    return guard([&] {
        Manifest manifest = read_manifest(manifest_path);
        if (overrides.interval) manifest.interval = *overrides.interval;
        EstimatorConfig cfg = manifest.estimator;
        apply_estimator_overrides(cfg, overrides);
        CompensatorConfig ccfg = manifest.compensator;
        apply_compensator_overrides(ccfg, overrides);
        const int threads = resolve_threads(overrides);
        const int max_step = overrides.max_step.value_or(0);

        const SparseSequence seq = load_sequence(manifest, manifest_path.parent_path());
        const TrainingSet set = rearrange_dataset(seq, cfg, ccfg, threads, max_step);

        fs::create_directories(out_dir);
        json index;
        index["interval"] = manifest.interval;
        index["num_classes"] = manifest.num_classes;
        index["labeled"] = write_set(out_dir, "labeled", set.labeled);
        index["relabeled"] = write_set(out_dir, "relabeled", set.relabeled);
        index["compensated"] = write_set(out_dir, "compensated", set.compensated);
        std::ofstream out(out_dir / "index.json");
        if (!out) throw std::runtime_error((out_dir / "index.json").string() +
                                           ": cannot open for writing");
        out << index.dump(2) << "\n";

        std::cout << "labeled " << set.labeled.size() << ", relabeled " << set.relabeled.size()
                  << ", compensated " << set.compensated.size() << "\n";
        return kExitOk;
    });
}

int cmd_evaluate(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                 int num_classes) {
    return guard([&] {
        detail::require(num_classes >= 1, "num_classes must be >= 1");
        detail::require(fs::is_directory(pred_dir), "prediction directory does not exist");
        detail::require(fs::is_directory(gt_dir), "ground-truth directory does not exist");

        std::map<std::string, fs::path> masks, frames;
        for (const auto& entry : fs::directory_iterator(pred_dir)) {
            const std::string name = entry.path().filename().string();
            if (name.starts_with("mask_") && name.ends_with(".png")) masks[name] = entry.path();
            if (name.starts_with("frame_") && name.ends_with(".png")) frames[name] = entry.path();
        }
        detail::require(!masks.empty() || !frames.empty(),
                        "prediction directory has no mask_*.png or frame_*.png files");

        // +inf PSNR (identical frames) has no JSON number; report it as "inf".
        const auto db_json = [](double db) {
            return std::isfinite(db) ? json(db) : json("inf");
        };

        json report;
        double iou_sum = 0.0, dice_sum = 0.0;
        json mask_report = json::object();
        for (const auto& [name, path] : masks) {
            const fs::path gt_path = gt_dir / name;
            if (!fs::exists(gt_path))
                throw std::runtime_error(gt_path.string() + ": missing ground-truth mask");
            const SegScore score =
                segmentation_score(read_mask_png(path), read_mask_png(gt_path), num_classes);
            iou_sum += score.mean_iou;
            dice_sum += score.mean_dice;
            json per_iou = json::object(), per_dice = json::object();
            for (const auto& [c, v] : score.per_class_iou) per_iou[std::to_string(c)] = v;
            for (const auto& [c, v] : score.per_class_dice) per_dice[std::to_string(c)] = v;
            mask_report[name] = json{{"mean_iou", score.mean_iou},
                                     {"mean_dice", score.mean_dice},
                                     {"per_class_iou", per_iou},
                                     {"per_class_dice", per_dice}};
        }
        if (!masks.empty()) {
            report["masks"] = mask_report;
            report["mean_iou"] = iou_sum / masks.size();
            report["mean_dice"] = dice_sum / masks.size();
        }

        double psnr_sum = 0.0;
        json frame_report = json::object();
        for (const auto& [name, path] : frames) {
            const fs::path gt_path = gt_dir / name;
            if (!fs::exists(gt_path))
                throw std::runtime_error(gt_path.string() + ": missing ground-truth frame");
            const double db = psnr(read_frame_png(path), read_frame_png(gt_path));
            psnr_sum += db;
            frame_report[name] = json{{"psnr", db_json(db)}};
        }
        if (!frames.empty()) {
            report["frames"] = frame_report;
            report["mean_psnr"] = db_json(psnr_sum / frames.size());
        }

        std::cout << report.dump(2) << "\n";
        return kExitOk;
    });
}

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"sparse-to-dense video label propagation"};
    app.require_subcommand(1);

    std::string spec_path, manifest_path, out_path, pred_dir, gt_dir;
    std::uint64_t seed = 1;
    int t = 0;
    int num_classes = 2;
    ConfigOverrides ov;
    std::vector<double> cycle_lambdas;

    CLI::App* synth = app.add_subcommand("synth", "render a synthetic labeled sequence");
    synth->add_option("spec", spec_path, "scene spec json")->required();
    synth->add_option("out", out_path, "output directory")->required();
    synth->add_option("--seed", seed, "noise seed");

    const auto add_estimator_flags = [&](CLI::App* cmd) {
        cmd->add_option("--levels", ov.levels, "pyramid levels");
        cmd->add_option("--iters", ov.iters, "descent iterations per level");
        cmd->add_option("--step", ov.step, "initial descent step in pixels");
        cmd->add_option("--lambda1", ov.lambda_l1, "photometric weight");
        cmd->add_option("--lambdap", ov.lambda_perceptual, "perceptual weight");
        cmd->add_option("--lambdas", ov.lambda_smooth, "smoothness weight");
    };

    CLI::App* estimate = app.add_subcommand("estimate-flow", "estimate flow between frames t, t+1");
    estimate->add_option("manifest", manifest_path, "sequence manifest json")->required();
    estimate->add_option("t", t, "first frame index")->required();
    estimate->add_option("out", out_path, "output flow file")->required();
    add_estimator_flags(estimate);

    CLI::App* rearrange = app.add_subcommand("rearrange", "build the dense training set");
    rearrange->add_option("manifest", manifest_path, "sequence manifest json")->required();
    rearrange->add_option("out", out_path, "output directory")->required();
    add_estimator_flags(rearrange);
    rearrange->add_option("--cycle-lambdas", cycle_lambdas,
                          "cycle weights: endpoint0 intermediate endpoint1 perceptual")
        ->expected(4);
    rearrange->add_option("--k", ov.max_step, "largest allowed propagation step");
    rearrange->add_option("--interval", ov.interval, "labeling stride override");
    rearrange->add_option("--threads", ov.threads, "worker threads");

    CLI::App* evaluate = app.add_subcommand("evaluate", "score predictions against ground truth");
    evaluate->add_option("pred", pred_dir, "prediction directory")->required();
    evaluate->add_option("gt", gt_dir, "ground-truth directory")->required();
    evaluate->add_option("--classes", num_classes, "number of classes including background");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    }

    if (!cycle_lambdas.empty()) ov.cycle_lambdas = cycle_lambdas;

    if (app.got_subcommand(synth)) return cmd_synth(spec_path, out_path, seed);
    if (app.got_subcommand(estimate)) return cmd_estimate_flow(manifest_path, t, out_path, ov);
    if (app.got_subcommand(rearrange)) return cmd_rearrange(manifest_path, out_path, ov);
    return cmd_evaluate(pred_dir, gt_dir, num_classes);
}

}  // namespace motionflow
