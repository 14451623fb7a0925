#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "edlb/config.hpp"
#include "edlb/errors.hpp"
#include "edlb/formats.hpp"
#include "edlb/synthdata.hpp"
#include "edlb/train.hpp"

using namespace edlb;

namespace {

void print_counts(const char* label, const ParamCount& c) {
    std::printf("%-10s total=%lld trainable=%lld frozen=%lld\n", label, static_cast<long long>(c.total),
                static_cast<long long>(c.trainable), static_cast<long long>(c.frozen));
}

void print_summary(const TrainSummary& s) {
    if (!s.epoch_mean.empty()) {
        const double first = s.epoch_mean.front(), last = s.epoch_mean.back();
        std::printf("loss first_epoch=%.6f last_epoch=%.6f drop=%.1f%%\n", first, last, 100.0 * (first - last) / first);
    }
    print_counts("depth", s.depth_count);
    std::printf("trainable_fraction=%.4f\n", s.depth_count.total ? double(s.depth_count.trainable) / double(s.depth_count.total) : 0.0);
    std::printf("checkpoint=%s\nlog=%s\n", s.final_checkpoint.string().c_str(), s.log_path.string().c_str());
}

RunConfig run_config(const std::string& path, const std::string& out_override) {
    RunConfig c = path.empty() ? RunConfig{} : load_run_config(path);
    if (!out_override.empty()) c.output_dir = out_override;
    return c;
}

void write_report(const std::filesystem::path& out_dir, const std::string& stem, const std::string& tsv, const std::string& json) {
    if (out_dir.empty()) return;
    write_file(out_dir / (stem + ".tsv"), tsv);
    write_file(out_dir / (stem + ".json"), json);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-supervised depth with low-rank adapters: data generation, training and evaluation"};
    app.require_subcommand(1);
    const Progress progress = [](const std::string& line) { std::fprintf(stderr, "%s\n", line.c_str()); };

    // gen-data
    std::string scene_file, preset = "A", data_out;
    long long seed_override = -1;
    auto* gen = app.add_subcommand("gen-data", "Render a synthetic dataset with a manifest");
    gen->add_option("--spec", scene_file, "Scene JSON (keys of the scene spec; \"preset\" selects the base domain)")->check(CLI::ExistingFile);
    gen->add_option("--preset", preset, "Base domain when no spec file is given")->check(CLI::IsMember({"A", "B"}));
    gen->add_option("--seed", seed_override, "Override the scene seed");
    gen->add_option("-o,--out", data_out, "Output directory")->required();

    // pretrain / finetune
    std::string config_path, out_dir, base_ckpt;
    auto* pre = app.add_subcommand("pretrain", "Train the base network on a dataset");
    pre->add_option("-c,--config", config_path, "Run config JSON")->required()->check(CLI::ExistingFile);
    pre->add_option("-o,--out", out_dir, "Override output_dir");

    auto* fine = app.add_subcommand("finetune", "Fine-tune adapters and Res-DSC blocks on top of a frozen base");
    fine->add_option("-c,--config", config_path, "Run config JSON")->required()->check(CLI::ExistingFile);
    fine->add_option("-b,--base", base_ckpt, "Base checkpoint (overrides finetune.base_checkpoint)");
    fine->add_option("-o,--out", out_dir, "Override output_dir");

    // eval-depth / eval-pose
    std::string ckpt, data_path, split, report_dir;
    bool visualize = false;
    auto* ed = app.add_subcommand("eval-depth", "Median-scaled depth metrics of a checkpoint");
    ed->add_option("-c,--config", config_path, "Run config JSON (eval settings and data paths)")->check(CLI::ExistingFile);
    ed->add_option("-k,--checkpoint", ckpt, "Checkpoint to evaluate")->required()->check(CLI::ExistingFile);
    ed->add_option("-d,--data", data_path, "Dataset directory (overrides data.eval)");
    ed->add_option("-s,--split", split, "Split to evaluate (default: data.eval_split)");
    ed->add_option("-o,--out", report_dir, "Write depth_eval.tsv / depth_eval.json here");
    ed->add_flag("--visualize", visualize, "Also write grayscale disparity PPMs into <out>/vis");

    auto* ep = app.add_subcommand("eval-pose", "Absolute trajectory error of chained pose estimates");
    ep->add_option("-c,--config", config_path, "Run config JSON")->check(CLI::ExistingFile);
    ep->add_option("-k,--checkpoint", ckpt, "Checkpoint to evaluate")->required()->check(CLI::ExistingFile);
    ep->add_option("-d,--data", data_path, "Dataset directory (overrides data.eval)");
    ep->add_option("-s,--split", split, "Split to evaluate (default: data.eval_split)");
    ep->add_option("-o,--out", report_dir, "Write pose_eval.tsv / pose_eval.json here");

    auto* pc = app.add_subcommand("param-count", "Total, trainable and frozen parameters per module");
    pc->add_option("-c,--config", config_path, "Run config JSON (defaults when omitted)")->check(CLI::ExistingFile);
    bool base_only = false;
    pc->add_flag("--pretrain", base_only, "Count the base network as trained during pretraining");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::fprintf(stderr, "edlb: error: %s\n", e.what());
        return 2;
    }

    try {
        if (*gen) {
            SceneSpec spec = scene_file.empty() ? SceneSpec::preset(preset) : SceneSpec::from_json(read_file(scene_file));
            if (seed_override >= 0) spec.seed = static_cast<std::uint64_t>(seed_override);
            const auto s = write_dataset(spec, data_out);
            std::printf("sequences=%d frames=%d train=%d val=%d test=%d\n", s.sequences, s.frames, s.train, s.val, s.test);
        } else if (*pre) {
            print_summary(pretrain(run_config(config_path, out_dir), progress));
        } else if (*fine) {
            RunConfig c = run_config(config_path, out_dir);
            if (!base_ckpt.empty()) c.base_checkpoint = base_ckpt;
            const auto s = finetune(c, progress);
            print_summary(s);
            std::printf("base_hash=%s unchanged\n", s.base_hash_after.c_str());
        } else if (*ed || *ep) {
            const RunConfig c = run_config(config_path, "");
            const std::string path = data_path.empty() ? c.eval_data : data_path;
            const std::string which = split.empty() ? c.eval_split : split;
            if (path.empty()) throw ConfigError("no dataset: pass --data or set data.eval");
            const Models models = load_models(ckpt, c.seed);
            if (*ed) {
                const Dataset data = load_dataset(path, which);
                if (data.samples.empty()) throw EvalError("no samples in split '" + which + "'");
                const bool vis = (visualize || c.visualize) && !report_dir.empty();
                const auto report = evaluate_depth_model(models, data, c.eval, vis ? std::filesystem::path(report_dir) / "vis" : std::filesystem::path{});
                write_report(report_dir, "depth_eval", report.tsv(), report.json());
                const auto m = report.mean();
                std::printf("images=%zu abs_rel=%.4f sq_rel=%.4f rmse=%.4f rmse_log=%.4f delta=%.4f\n", report.size(), m.abs_rel,
                            m.sq_rel, m.rmse, m.rmse_log, m.delta);
            } else {
                const auto rows = evaluate_pose_model(models, path, which);
                write_report(report_dir, "pose_eval", pose_report_tsv(rows), pose_report_json(rows));
                std::fputs(pose_report_tsv(rows).c_str(), stdout);
            }
        } else if (*pc) {
            const RunConfig c = run_config(config_path, "");
            const bool finetuning = !base_only;
            ParamCount depth, all;
            std::printf("%-18s %10s %10s %10s\n", "module", "total", "trainable", "frozen");
            for (const auto& row : param_breakdown(c.model, finetuning)) {
                std::printf("%-18s %10lld %10lld %10lld\n", row.module.c_str(), static_cast<long long>(row.count.total),
                            static_cast<long long>(row.count.trainable), static_cast<long long>(row.count.frozen));
                if (row.module.rfind("encoder", 0) == 0 || row.module.rfind("decoder", 0) == 0) {
                    depth.total += row.count.total;
                    depth.trainable += row.count.trainable;
                    depth.frozen += row.count.frozen;
                }
                all.total += row.count.total;
                all.trainable += row.count.trainable;
                all.frozen += row.count.frozen;
            }
            print_counts("depth", depth);
            print_counts("all", all);
            std::printf("trainable_fraction=%.4f\n", depth.total ? double(depth.trainable) / double(depth.total) : 0.0);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "edlb: error: %s\n", e.what());
        return 1;
    }
    return 0;
}
