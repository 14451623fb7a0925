#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "edlb/config.hpp"
#include "edlb/eval.hpp"
#include "edlb/losses.hpp"
#include "edlb/nets.hpp"
#include "edlb/synthdata.hpp"

namespace edlb {

/// Depth network plus the auxiliary networks of the self-supervised objective.
struct Models {
    Models(const DepthNetConfig& config, std::uint64_t seed);

    DepthNet depth;
    PoseNet pose;
    DecompositionNet decomp;
    ShadingAdjust adjust;

    ParamList<float> depth_params() const { return depth.params(); }
    ParamList<float> aux_params() const;
    ParamList<float> all_params() const;
};

/// The base architecture: same dims, no adapters, no Res-DSC.
DepthNetConfig base_config(const DepthNetConfig& config);

struct Batch {
    Tensor target;                 // [B, 3, H, W]
    std::array<Tensor, 2> sources; // previous, next
    Intrinsics K;
};

Batch make_batch(const Dataset& data, std::span<const std::size_t> indices);

struct LossBreakdown {
    double ds = 0, a = 0, ms = 0, es = 0, total = 0;
};

/// lambda_ds * L_ds + mean over scales of (lambda_a * L_a + lambda_ms * L_ms + lambda_es * L_es).
/// Coarser disparities are upsampled to full resolution before warping.
Tensor training_loss(const Models& models, const Batch& batch, const RunConfig& config, LossBreakdown* parts = nullptr);

struct TrainSummary {
    std::vector<LossBreakdown> steps;
    std::vector<double> epoch_mean;  // mean total loss per epoch
    ParamCount depth_count;
    ParamCount aux_count;
    std::filesystem::path final_checkpoint;
    std::filesystem::path log_path;
    std::string base_hash_before, base_hash_after;  // finetune only
};

using Progress = std::function<void(const std::string&)>;

/// Trains the base network on config.train_data. Writes epoch_NNN.ckpt,
/// final.ckpt and pretrain.log into config.output_dir.
TrainSummary pretrain(const RunConfig& config, const Progress& progress = {});

/// Loads config.base_checkpoint, attaches adapters / Res-DSC per config.model,
/// trains only those plus the depth heads (and fresh auxiliary networks).
TrainSummary finetune(const RunConfig& config, const Progress& progress = {});

/// Rebuilds the networks stored in a checkpoint.
Models load_models(const std::filesystem::path& checkpoint, std::uint64_t seed = 0);

/// Per-image median-scaled metrics over a dataset. Writes grayscale
/// disparity images into vis_dir when it is non-empty.
EvalReport evaluate_depth_model(const Models& models, const Dataset& data, const DepthEvalConfig& eval,
                                const std::filesystem::path& vis_dir = {});

struct PoseResult {
    int sequence = 0;
    int frames = 0;
    double ate = 0;
};

/// ATE per sequence of the split, from chained frame-to-frame PoseNet estimates.
std::vector<PoseResult> evaluate_pose_model(const Models& models, const std::filesystem::path& data_root,
                                            const std::string& split);
std::string pose_report_tsv(const std::vector<PoseResult>& rows);
std::string pose_report_json(const std::vector<PoseResult>& rows);

/// Per-module parameter breakdown of the fine-tuning setup for a config.
struct ModuleCount {
    std::string module;
    ParamCount count;
};
std::vector<ModuleCount> param_breakdown(const DepthNetConfig& config, bool finetune);

}  // namespace edlb
