#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "edlb/eval.hpp"
#include "edlb/losses.hpp"
#include "edlb/nets.hpp"
#include "edlb/optim.hpp"

namespace edlb {

/// Everything a pretrain / finetune / eval run needs. Loaded from nested
/// JSON; every section and key is optional, unknown keys are rejected.
///
///   { "seed": 7, "output_dir": "runs/a",
///     "model":    { "embed_dim": 96, "adapter": "rvlora", "rank": 4, ... },
///     "loss":     { "ds": 0.2, "a": 0.2, "ms": 1, "es": 0.01, "num_scales": 4, "min_reprojection": true },
///     "optim":    { "lr": 1e-4, "beta1": 0.9, "beta2": 0.999, "lr_decay": 0.1, "decay_epoch": 10 },
///     "train":    { "epochs": 15, "batch_size": 8, "max_steps_per_epoch": 0 },
///     "data":     { "train": "data/a", "eval": "data/a", "train_split": "train", "eval_split": "test" },
///     "finetune": { "base_checkpoint": "runs/a/final.ckpt" },
///     "eval":     { "cap": 150, "min_depth": 0.001, "visualize": false } }
struct RunConfig {
    std::uint64_t seed = 7;
    std::string output_dir = "runs/default";

    DepthNetConfig model;
    LossWeights weights;
    int num_scales = 4;
    bool min_reprojection = true;

    AdamOptions adam;
    double lr_decay = 0.1;
    int decay_epoch = 10;  // the decay applies from the epoch after this one

    int epochs = 15;
    int batch_size = 8;
    int max_steps_per_epoch = 0;  // 0 = one pass over the data
    bool keep_epoch_checkpoints = true;

    std::string train_data;
    std::string eval_data;
    std::string train_split = "train";
    std::string eval_split = "test";

    std::string base_checkpoint;

    DepthEvalConfig eval;
    bool visualize = false;

    void validate() const;
    double lr_for_epoch(int epoch) const;  // 1-based

    static RunConfig from_json(const std::string& text);
    std::string to_json() const;
};

RunConfig load_run_config(const std::filesystem::path& path);

// The "model" section on its own, as stored in checkpoint metadata.
std::string model_to_json(const DepthNetConfig& model);
DepthNetConfig model_from_json(const std::string& text);

}  // namespace edlb
