#include "edlb/config.hpp"

#include <algorithm>

#include "edlb/errors.hpp"
#include "edlb/formats.hpp"
#include "json.hpp"

namespace edlb {

namespace {

using json = nlohmann::json;

// Applies the keys of one JSON section through a table of setters.
class Section {
public:
    Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) throw ConfigError("config: '" + name_ + "' must be an object");
    }

    template <typename V>
    Section& opt(const char* key, V& target) {
        known_.push_back(key);
        if (j_.contains(key)) {
            try {
                target = j_.at(key).get<V>();
            } catch (const json::exception&) {
                throw ConfigError("config: '" + path(key) + "' has the wrong type");
            }
        }
        return *this;
    }

    template <typename F>
    Section& custom(const char* key, F&& apply) {
        known_.push_back(key);
        if (j_.contains(key)) apply(j_.at(key));
        return *this;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (std::find(known_.begin(), known_.end(), it.key()) == known_.end()) {
                throw ConfigError("config: unknown key '" + path(it.key()) + "'");
            }
        }
    }

private:
    std::string path(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

    const json& j_;
    std::string name_;
    std::vector<std::string> known_;
};

std::string need_string(const json& v, const char* key) {
    if (!v.is_string()) throw ConfigError(std::string("config: '") + key + "' must be a string");
    return v.get<std::string>();
}

}  // namespace

void RunConfig::validate() const {
    model.validate();
    if (num_scales < 1 || num_scales > 4) throw ConfigError("config: loss.num_scales must be 1..4");
    if (weights.ds < 0 || weights.a < 0 || weights.ms < 0 || weights.es < 0) throw ConfigError("config: loss weights must be non-negative");
    if (!(adam.lr > 0.0)) throw ConfigError("config: optim.lr must be positive");
    if (adam.beta1 < 0 || adam.beta1 >= 1 || adam.beta2 < 0 || adam.beta2 >= 1) throw ConfigError("config: Adam betas must lie in [0, 1)");
    if (!(lr_decay > 0.0)) throw ConfigError("config: optim.lr_decay must be positive");
    if (epochs < 1) throw ConfigError("config: train.epochs must be at least 1");
    if (batch_size < 1) throw ConfigError("config: train.batch_size must be at least 1");
    if (max_steps_per_epoch < 0) throw ConfigError("config: train.max_steps_per_epoch must be non-negative");
    eval.validate();
}

double RunConfig::lr_for_epoch(int epoch) const { return epoch > decay_epoch ? adam.lr * lr_decay : adam.lr; }

RunConfig RunConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config: ") + e.what(), e.byte > 0 ? e.byte - 1 : 0);
    }
    RunConfig c;
    Section root(j, "");
    root.opt("seed", c.seed).opt("output_dir", c.output_dir);
    root.custom("model", [&](const json& s) {
        auto& m = c.model;
        Section(s, "model")
            .opt("height", m.height)
            .opt("width", m.width)
            .opt("patch_size", m.patch_size)
            .opt("embed_dim", m.embed_dim)
            .opt("num_blocks", m.num_blocks)
            .opt("num_heads", m.num_heads)
            .opt("mlp_ratio", m.mlp_ratio)
            .opt("res_dsc_count", m.res_dsc_count)
            .opt("res_dsc_reduction", m.res_dsc_reduction)
            .custom("adapter", [&](const json& v) { m.adapter = parse_adapter_kind(need_string(v, "model.adapter")); })
            .opt("rank", m.rank)
            .custom("init", [&](const json& v) { m.init = parse_init_policy(need_string(v, "model.init")); })
            .opt("adapt_attention", m.adapt_attention)
            .opt("train_bias", m.train_bias)
            .opt("min_depth", m.min_depth)
            .opt("max_depth", m.max_depth)
            .finish();
    });
    root.custom("loss", [&](const json& s) {
        Section(s, "loss")
            .opt("ds", c.weights.ds)
            .opt("a", c.weights.a)
            .opt("ms", c.weights.ms)
            .opt("es", c.weights.es)
            .opt("num_scales", c.num_scales)
            .opt("min_reprojection", c.min_reprojection)
            .finish();
    });
    root.custom("optim", [&](const json& s) {
        Section(s, "optim")
            .opt("lr", c.adam.lr)
            .opt("beta1", c.adam.beta1)
            .opt("beta2", c.adam.beta2)
            .opt("eps", c.adam.eps)
            .opt("clip_norm", c.adam.clip_norm)
            .opt("lr_decay", c.lr_decay)
            .opt("decay_epoch", c.decay_epoch)
            .finish();
    });
    root.custom("train", [&](const json& s) {
        Section(s, "train")
            .opt("epochs", c.epochs)
            .opt("batch_size", c.batch_size)
            .opt("max_steps_per_epoch", c.max_steps_per_epoch)
            .opt("keep_epoch_checkpoints", c.keep_epoch_checkpoints)
            .finish();
    });
    root.custom("data", [&](const json& s) {
        Section(s, "data")
            .opt("train", c.train_data)
            .opt("eval", c.eval_data)
            .opt("train_split", c.train_split)
            .opt("eval_split", c.eval_split)
            .finish();
    });
    root.custom("finetune", [&](const json& s) { Section(s, "finetune").opt("base_checkpoint", c.base_checkpoint).finish(); });
    root.custom("eval", [&](const json& s) {
        Section(s, "eval").opt("cap", c.eval.cap).opt("min_depth", c.eval.min_depth).opt("visualize", c.visualize).finish();
    });
    root.finish();
    c.validate();
    return c;
}

std::string RunConfig::to_json() const {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["output_dir"] = output_dir;
    j["model"] = {{"height", model.height},
                  {"width", model.width},
                  {"patch_size", model.patch_size},
                  {"embed_dim", model.embed_dim},
                  {"num_blocks", model.num_blocks},
                  {"num_heads", model.num_heads},
                  {"mlp_ratio", model.mlp_ratio},
                  {"res_dsc_count", model.res_dsc_count},
                  {"res_dsc_reduction", model.res_dsc_reduction},
                  {"adapter", to_string(model.adapter)},
                  {"rank", model.rank},
                  {"init", to_string(model.init)},
                  {"adapt_attention", model.adapt_attention},
                  {"train_bias", model.train_bias},
                  {"min_depth", model.min_depth},
                  {"max_depth", model.max_depth}};
    j["loss"] = {{"ds", weights.ds},
                 {"a", weights.a},
                 {"ms", weights.ms},
                 {"es", weights.es},
                 {"num_scales", num_scales},
                 {"min_reprojection", min_reprojection}};
    j["optim"] = {{"lr", adam.lr},       {"beta1", adam.beta1},   {"beta2", adam.beta2},        {"eps", adam.eps},
                  {"clip_norm", adam.clip_norm}, {"lr_decay", lr_decay}, {"decay_epoch", decay_epoch}};
    j["train"] = {{"epochs", epochs},
                  {"batch_size", batch_size},
                  {"max_steps_per_epoch", max_steps_per_epoch},
                  {"keep_epoch_checkpoints", keep_epoch_checkpoints}};
    j["data"] = {{"train", train_data}, {"eval", eval_data}, {"train_split", train_split}, {"eval_split", eval_split}};
    j["finetune"] = {{"base_checkpoint", base_checkpoint}};
    j["eval"] = {{"cap", eval.cap}, {"min_depth", eval.min_depth}, {"visualize", visualize}};
    return j.dump(2) + "\n";
}

RunConfig load_run_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
    return RunConfig::from_json(read_file(path));
}

std::string model_to_json(const DepthNetConfig& model) {
    RunConfig c;
    c.model = model;
    return json::parse(c.to_json())["model"].dump();
}

DepthNetConfig model_from_json(const std::string& text) {
    return RunConfig::from_json("{\"model\": " + text + "}").model;
}

}  // namespace edlb
