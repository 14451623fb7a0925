#include "edlb/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "edlb/checkpoint.hpp"
#include "edlb/errors.hpp"
#include "edlb/formats.hpp"
#include "edlb/geometry.hpp"
#include "edlb/optim.hpp"
#include "json.hpp"

namespace edlb {

namespace {

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string checkpoint_meta(const std::string& phase, int epoch, std::uint64_t seed, const DepthNetConfig& model) {
    nlohmann::ordered_json j;
    j["phase"] = phase;
    j["epoch"] = epoch;
    j["seed"] = seed;
    j["model"] = nlohmann::ordered_json::parse(model_to_json(model));
    return j.dump();
}

Dataset load_checked(const std::string& path, const std::string& split, const DepthNetConfig& model, const char* role) {
    if (path.empty()) throw ConfigError(std::string("config: data.") + role + " is not set");
    Dataset data = load_dataset(path, split);
    if (data.samples.empty()) throw ConfigError("no samples in split '" + split + "' of " + path);
    const auto& s = data.samples.front();
    if (s.width != model.width || s.height != model.height) {
        throw ConfigError("data is " + std::to_string(s.width) + "x" + std::to_string(s.height) + " but the model expects " +
                          std::to_string(model.width) + "x" + std::to_string(model.height));
    }
    return data;
}

std::string params_line(const ParamCount& depth, const ParamCount& aux) {
    std::ostringstream os;
    os << "params\tdepth_trainable=" << depth.trainable << "\tdepth_total=" << depth.total << "\tdepth_frozen=" << depth.frozen
       << "\ttrainable_fraction=" << fmt("%.6f", depth.total ? double(depth.trainable) / double(depth.total) : 0.0)
       << "\taux_trainable=" << aux.trainable << "\taux_total=" << aux.total;
    return os.str();
}

// Shared epoch loop for both phases.
TrainSummary run_training(Models& models, const RunConfig& config, const std::string& phase, const Dataset& data,
                          const DepthNetConfig& saved_model, const Progress& progress,
                          const std::vector<std::string>& extra_log) {
    const auto params = models.all_params();
    Adam<float> adam(params, config.adam);
    const auto out_dir = std::filesystem::path(config.output_dir);
    std::filesystem::create_directories(out_dir);

    TrainSummary summary;
    summary.depth_count = count_params(models.depth_params());
    summary.aux_count = count_params(models.aux_params());
    if (summary.depth_count.trainable == 0) throw ConfigError("nothing to fine-tune: the depth network has no trainable leaves");

    std::string log = "step\tepoch\tlr\tL_ds\tL_a\tL_ms\tL_es\ttotal\n";
    const std::size_t n = data.samples.size();
    const std::size_t batch = std::min<std::size_t>(config.batch_size, n);
    std::size_t steps_per_epoch = n / batch;
    if (config.max_steps_per_epoch > 0) steps_per_epoch = std::min<std::size_t>(steps_per_epoch, config.max_steps_per_epoch);

    Rng order_rng = Rng::derive(config.seed, Rng::hash(("batches." + phase).c_str()));
    std::vector<std::size_t> order(n);
    int step = 0;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        adam.set_lr(config.lr_for_epoch(epoch));
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
        double epoch_sum = 0.0;
        for (std::size_t k = 0; k < steps_per_epoch; ++k) {
            const auto b = make_batch(data, std::span<const std::size_t>(order).subspan(k * batch, batch));
            LossBreakdown parts;
            {
                Tensor loss = training_loss(models, b, config, &parts);
                adam.zero_grad();
                loss.backward();
            }
            if (!std::isfinite(parts.total)) throw ContractError("training diverged: loss is not finite at step " + std::to_string(step + 1));
            adam.step();
            ++step;
            summary.steps.push_back(parts);
            epoch_sum += parts.total;
            log += std::to_string(step) + "\t" + std::to_string(epoch) + "\t" + fmt("%.3g", adam.lr()) + "\t" +
                   fmt("%.6f", parts.ds) + "\t" + fmt("%.6f", parts.a) + "\t" + fmt("%.6f", parts.ms) + "\t" +
                   fmt("%.6f", parts.es) + "\t" + fmt("%.6f", parts.total) + "\n";
        }
        const double mean = epoch_sum / static_cast<double>(steps_per_epoch);
        summary.epoch_mean.push_back(mean);
        log += "# epoch " + std::to_string(epoch) + " mean_total " + fmt("%.6f", mean) + "\n";
        const std::string meta = checkpoint_meta(phase, epoch, config.seed, saved_model);
        if (config.keep_epoch_checkpoints) {
            char name[32];
            std::snprintf(name, sizeof name, "epoch_%03d.ckpt", epoch);
            save_checkpoint(out_dir / name, params, meta);
        }
        if (epoch == config.epochs) save_checkpoint(out_dir / "final.ckpt", params, meta);
        write_file(out_dir / (phase + ".log"), log);
        if (progress) progress(phase + " epoch " + std::to_string(epoch) + "/" + std::to_string(config.epochs) + " mean loss " + fmt("%.6f", mean));
    }
    for (const auto& line : extra_log) log += line + "\n";
    log += params_line(summary.depth_count, summary.aux_count) + "\n";
    summary.final_checkpoint = out_dir / "final.ckpt";
    summary.log_path = out_dir / (phase + ".log");
    write_file(summary.log_path, log);
    return summary;
}

}  // namespace

// ---------------------------------------------------------------------------

Models::Models(const DepthNetConfig& config, std::uint64_t seed)
    : depth(config, seed), pose(seed), decomp(seed), adjust(seed) {}

ParamList<float> Models::aux_params() const {
    ParamList<float> out;
    pose.collect(out);
    decomp.collect(out);
    adjust.collect(out);
    return out;
}

ParamList<float> Models::all_params() const {
    auto out = depth.params();
    auto aux = aux_params();
    out.insert(out.end(), aux.begin(), aux.end());
    return out;
}

DepthNetConfig base_config(const DepthNetConfig& config) {
    DepthNetConfig base = config;
    base.adapter = AdapterKind::None;
    base.res_dsc_count = 0;
    return base;
}

Batch make_batch(const Dataset& data, std::span<const std::size_t> indices) {
    if (indices.empty()) throw ContractError("make_batch: empty batch");
    const auto& first = data.samples.at(indices[0]);
    const std::int64_t H = first.height, W = first.width, B = static_cast<std::int64_t>(indices.size());
    const std::size_t per = 3 * std::size_t(H) * W;
    std::vector<float> t, s0, s1;
    t.reserve(B * per);
    s0.reserve(B * per);
    s1.reserve(B * per);
    for (auto i : indices) {
        const auto& s = data.samples.at(i);
        if (s.width != W || s.height != H) throw DimensionError("make_batch: mixed image sizes");
        if (s.K.fx != first.K.fx || s.K.fy != first.K.fy || s.K.cx != first.K.cx || s.K.cy != first.K.cy) {
            throw ContractError("make_batch: samples with different intrinsics");
        }
        t.insert(t.end(), s.target.begin(), s.target.end());
        s0.insert(s0.end(), s.sources[0].begin(), s.sources[0].end());
        s1.insert(s1.end(), s.sources[1].begin(), s.sources[1].end());
    }
    const Shape shape{B, 3, H, W};
    return {Tensor::from(shape, std::move(t)), {Tensor::from(shape, std::move(s0)), Tensor::from(shape, std::move(s1))}, first.K};
}

Tensor training_loss(const Models& m, const Batch& b, const RunConfig& c, LossBreakdown* parts) {
    const std::int64_t B = b.target.dim(0), H = b.target.dim(2), W = b.target.dim(3);
    const auto& model = m.depth.config();

    // Decompose target and sources in one pass.
    const Tensor all = concat<float>({b.target, b.sources[0], b.sources[1]}, 0);
    const auto dec = m.decomp(all);
    const Tensor l_ds = loss_ds(all, dec.reflectance, dec.shading);
    const Tensor r_t = slice(dec.reflectance, 0, 0, B);
    std::array<Tensor, 2> rs;  // reflectance and shading of each source, 4 channels
    for (int k = 0; k < 2; ++k) {
        rs[k] = concat<float>({slice(dec.reflectance, 0, (k + 1) * B, (k + 2) * B), slice(dec.shading, 0, (k + 1) * B, (k + 2) * B)}, 1);
    }

    const auto disps = m.depth.forward(b.target);
    std::array<PoseTensors<float>, 2> poses;
    for (int k = 0; k < 2; ++k) poses[k] = pose_from_vector(m.pose(b.target, b.sources[k]));

    Tensor scale_sum;
    double a_sum = 0, ms_sum = 0, es_sum = 0;
    for (int s = 0; s < c.num_scales; ++s) {
        Tensor disp = disps[s];
        if (disp.dim(2) != H || disp.dim(3) != W) disp = bilinear_upsample(disp, H, W);
        const Tensor depth = disp_to_depth(disp, model.min_depth, model.max_depth);
        std::vector<Tensor> preds, masks;
        Tensor l_a;
        for (int k = 0; k < 2; ++k) {
            const auto rp = reproject(depth, b.K, poses[k].R, poses[k].t);
            const auto w = warp(rs[k], rp.coords, rp.valid);
            const Tensor wr = slice(w.image, 1, 0, 3);
            const Tensor s_adj = m.adjust(slice(w.image, 1, 3, 4));
            preds.push_back(mul(wr, s_adj));
            masks.push_back(w.mask);
            const Tensor la = loss_albedo(r_t, wr, w.mask);
            l_a = l_a.defined() ? add(l_a, la) : la;
        }
        l_a = mul_scalar(l_a, 0.5f);
        const Tensor l_ms = photometric_multi(preds, b.target, masks, c.min_reprojection);
        const Tensor l_es = smoothness(disp, b.target);
        const Tensor term = add(add(mul_scalar(l_a, float(c.weights.a)), mul_scalar(l_ms, float(c.weights.ms))),
                                mul_scalar(l_es, float(c.weights.es)));
        scale_sum = scale_sum.defined() ? add(scale_sum, term) : term;
        a_sum += l_a.item();
        ms_sum += l_ms.item();
        es_sum += l_es.item();
    }
    const Tensor total = add(mul_scalar(l_ds, float(c.weights.ds)), mul_scalar(scale_sum, float(1.0 / c.num_scales)));
    if (parts) {
        parts->ds = l_ds.item();
        parts->a = a_sum / c.num_scales;
        parts->ms = ms_sum / c.num_scales;
        parts->es = es_sum / c.num_scales;
        parts->total = total.item();
    }
    return total;
}

TrainSummary pretrain(const RunConfig& config, const Progress& progress) {
    config.validate();
    const DepthNetConfig base = base_config(config.model);
    const Dataset data = load_checked(config.train_data, config.train_split, base, "train");
    Models models(base, config.seed);
    models.depth.set_trainable_all(true);
    return run_training(models, config, "pretrain", data, base, progress, {});
}

TrainSummary finetune(const RunConfig& config, const Progress& progress) {
    config.validate();
    if (config.model.adapter == AdapterKind::None && config.model.res_dsc_count == 0) {
        throw ConfigError("nothing to fine-tune: adapter is none and res_dsc_count is 0");
    }
    if (config.base_checkpoint.empty()) throw ConfigError("finetune needs finetune.base_checkpoint");
    const std::string base_bytes = [&] {
        if (!std::filesystem::exists(config.base_checkpoint)) throw LoadError("checkpoint not found: " + config.base_checkpoint);
        return read_file(config.base_checkpoint);
    }();
    const std::string hash_before = content_hash(base_bytes);
    const Checkpoint base = decode_checkpoint(base_bytes);

    const Dataset data = load_checked(config.train_data, config.train_split, config.model, "train");
    Models models(config.model, config.seed);
    // Adapters and Res-DSC blocks are new; every other leaf, auxiliary networks included, comes from the base.
    load_params(base, models.all_params(), is_attached_leaf);
    models.depth.set_finetune_mode();

    std::vector<std::string> extra;
    extra.push_back("# base " + hash_before);
    auto summary = run_training(models, config, "finetune", data, config.model, progress, extra);
    summary.base_hash_before = hash_before;
    summary.base_hash_after = content_hash(read_file(config.base_checkpoint));
    if (summary.base_hash_after != hash_before) throw ContractError("base checkpoint changed during fine-tuning");
    return summary;
}

Models load_models(const std::filesystem::path& checkpoint, std::uint64_t seed) {
    const Checkpoint ckpt = load_checkpoint(checkpoint);
    DepthNetConfig model;
    try {
        const auto meta = nlohmann::json::parse(ckpt.meta);
        model = model_from_json(meta.at("model").dump());
    } catch (const nlohmann::json::exception& e) {
        throw LoadError("checkpoint metadata is unreadable: " + std::string(e.what()));
    }
    Models models(model, seed);
    load_params(ckpt, models.all_params());
    return models;
}

// ---------------------------------------------------------------------------

EvalReport evaluate_depth_model(const Models& models, const Dataset& data, const DepthEvalConfig& eval,
                                const std::filesystem::path& vis_dir) {
    eval.validate();
    NoGradGuard guard;
    EvalReport report;
    const auto& model = models.depth.config();
    constexpr std::size_t kChunk = 8;
    for (std::size_t start = 0; start < data.samples.size(); start += kChunk) {
        std::vector<std::size_t> idx;
        for (std::size_t i = start; i < std::min(data.samples.size(), start + kChunk); ++i) idx.push_back(i);
        const auto batch = make_batch(data, idx);
        const Tensor disp = models.depth.forward(batch.target)[0];
        const Tensor depth = disp_to_depth(disp, model.min_depth, model.max_depth);
        const std::size_t hw = std::size_t(batch.target.dim(2)) * batch.target.dim(3);
        for (std::size_t j = 0; j < idx.size(); ++j) {
            const auto& s = data.samples[idx[j]];
            std::vector<double> pred(depth.data().begin() + j * hw, depth.data().begin() + (j + 1) * hw);
            std::vector<double> gt(s.depth.begin(), s.depth.end());
            report.add(s.target_path, evaluate_depth(pred, gt, eval));
            if (!vis_dir.empty()) {
                const auto d = disp.data().subspan(j * hw, hw);
                const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
                const double span = std::max(1e-12, double(*hi) - double(*lo));
                Image8 img{s.width, s.height, std::vector<std::uint8_t>(3 * hw)};
                for (std::size_t p = 0; p < hw; ++p) {
                    const auto v = static_cast<std::uint8_t>(std::lround(255.0 * (d[p] - *lo) / span));
                    img.rgb[3 * p] = img.rgb[3 * p + 1] = img.rgb[3 * p + 2] = v;
                }
                char name[64];
                std::snprintf(name, sizeof name, "seq%03d_%04d.ppm", s.sequence, s.frame);
                write_ppm(vis_dir / name, img);
            }
        }
    }
    return report;
}

std::vector<PoseResult> evaluate_pose_model(const Models& models, const std::filesystem::path& data_root,
                                            const std::string& split) {
    std::filesystem::path root = data_root;
    if (!std::filesystem::is_directory(root)) root = root.parent_path();
    // Sequence ids of the split, in manifest order.
    std::set<int> seen;
    std::vector<int> sequences;
    {
        const auto text = read_file(root / "manifest.jsonl");
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            const auto j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded()) throw ParseError("manifest: malformed line", 0);
            if (!split.empty() && j.value("split", "") != split) continue;
            const int seq = j.at("sequence").get<int>();
            if (seen.insert(seq).second) sequences.push_back(seq);
        }
    }
    if (sequences.empty()) throw EvalError("no sequences in split '" + split + "'");

    NoGradGuard guard;
    std::vector<PoseResult> out;
    for (int seq : sequences) {
        const auto gt = load_trajectory(root, seq);
        char dir[32];
        std::snprintf(dir, sizeof dir, "seq%03d", seq);
        std::vector<Tensor> frames;
        for (std::size_t f = 0; f < gt.size(); ++f) {
            char name[32];
            std::snprintf(name, sizeof name, "image_%04zu.ppm", f);
            const auto img = read_ppm(root / dir / name);
            frames.push_back(Tensor::from({1, 3, img.height, img.width}, from_image8(img)));
        }
        std::vector<PoseSE3> rel;
        for (std::size_t f = 0; f + 1 < frames.size(); ++f) {
            const Tensor v = models.pose(frames[f], frames[f + 1]);
            const auto d = v.data();
            rel.push_back(PoseSE3::from_axis_angle({d[0], d[1], d[2]}, {d[3], d[4], d[5]}));
        }
        const auto pred = chain_relative(rel);
        out.push_back({seq, static_cast<int>(gt.size()), ate(positions(pred), positions(gt))});
    }
    return out;
}

std::string pose_report_tsv(const std::vector<PoseResult>& rows) {
    std::ostringstream os;
    os << "sequence\tframes\tate\n";
    double sum = 0, sq = 0;
    for (const auto& r : rows) {
        os << r.sequence << '\t' << r.frames << '\t' << fmt("%.4f", r.ate) << '\n';
        sum += r.ate;
    }
    const double mean = rows.empty() ? 0.0 : sum / rows.size();
    for (const auto& r : rows) sq += (r.ate - mean) * (r.ate - mean);
    os << "mean\t-\t" << fmt("%.4f", mean) << "\nstd\t-\t" << fmt("%.4f", rows.empty() ? 0.0 : std::sqrt(sq / rows.size())) << '\n';
    return os.str();
}

std::string pose_report_json(const std::vector<PoseResult>& rows) {
    nlohmann::ordered_json j;
    double sum = 0;
    auto& per = j["per_sequence"] = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        per.push_back({{"sequence", r.sequence}, {"frames", r.frames}, {"ate", r.ate}});
        sum += r.ate;
    }
    j["count"] = rows.size();
    j["mean_ate"] = rows.empty() ? 0.0 : sum / rows.size();
    return j.dump(2) + "\n";
}

std::vector<ModuleCount> param_breakdown(const DepthNetConfig& config, bool finetune) {
    Models models(finetune ? config : base_config(config), 0);
    if (finetune) models.depth.set_finetune_mode();
    else models.depth.set_trainable_all(true);
    std::map<std::string, ParamCount> groups;
    std::vector<std::string> order;
    auto bucket = [](const std::string& name) -> std::string {
        if (name.find(".rvlora.") != std::string::npos || name.find(".lora.") != std::string::npos) return "encoder.adapters";
        if (name.rfind("encoder.resdsc", 0) == 0) return "encoder.resdsc";
        if (name.rfind("encoder.block", 0) == 0) return "encoder.blocks";
        if (name.rfind("encoder.", 0) == 0) return "encoder.embed";
        if (name.rfind("decoder.head", 0) == 0) return "decoder.heads";
        if (name.rfind("decoder.", 0) == 0) return "decoder.fusion";
        return name.substr(0, name.find('.'));
    };
    for (const auto& p : models.all_params()) {
        const auto key = bucket(p.name);
        if (!groups.count(key)) order.push_back(key);
        auto& g = groups[key];
        g.total += p.tensor.numel();
        (p.tensor.requires_grad() ? g.trainable : g.frozen) += p.tensor.numel();
    }
    std::vector<ModuleCount> out;
    for (const auto& k : order) out.push_back({k, groups[k]});
    return out;
}

}  // namespace edlb
