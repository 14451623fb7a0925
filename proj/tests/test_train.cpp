#include <filesystem>

#include "doctest.h"
#include "edlb/checkpoint.hpp"
#include "edlb/config.hpp"
#include "edlb/errors.hpp"
#include "edlb/formats.hpp"
#include "edlb/train.hpp"

using namespace edlb;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("edlb_test_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

DepthNetConfig tiny_model() {
    DepthNetConfig m;
    m.height = 32;
    m.width = 40;
    m.embed_dim = 16;
    m.num_blocks = 4;
    m.num_heads = 2;
    m.mlp_ratio = 2;
    m.res_dsc_count = 2;
    m.rank = 2;
    return m;
}

SceneSpec tiny_scene(const std::string& preset) {
    auto s = SceneSpec::preset(preset);
    s.width = 40;
    s.height = 32;
    s.K = {32.0, 32.0, 19.5, 15.5};
    s.train_sequences = 1;
    s.test_sequences = 1;
    s.frames_per_sequence = 5;
    return s;
}

RunConfig tiny_run(const std::filesystem::path& data, const std::filesystem::path& out) {
    RunConfig c;
    c.model = tiny_model();
    c.epochs = 2;
    c.batch_size = 2;
    c.num_scales = 2;
    c.adam.lr = 1e-3;
    c.train_data = data.string();
    c.eval_data = data.string();
    c.output_dir = out.string();
    return c;
}

}  // namespace

TEST_CASE("checkpoint round trip restores every leaf") {
    Models a(tiny_model(), 3), b(tiny_model(), 4);
    const auto bytes = encode_checkpoint(a.all_params(), "{\"x\":1}");
    const auto ckpt = decode_checkpoint(bytes);
    CHECK(ckpt.meta == "{\"x\":1}");
    CHECK(load_params(ckpt, b.all_params()) == a.all_params().size());
    const auto pa = a.all_params(), pb = b.all_params();
    for (std::size_t i = 0; i < pa.size(); ++i) {
        REQUIRE(pa[i].name == pb[i].name);
        const auto da = pa[i].tensor.data(), db = pb[i].tensor.data();
        CHECK(std::equal(da.begin(), da.end(), db.begin()));
    }
    CHECK(encode_checkpoint(b.all_params(), "{\"x\":1}") == bytes);
}

TEST_CASE("checkpoint decoding rejects damaged input") {
    Models a(tiny_model(), 3);
    const auto bytes = encode_checkpoint(a.depth_params(), "{}");
    CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 1)), LoadError);
    CHECK_THROWS_AS(decode_checkpoint("XXXX" + bytes.substr(4)), LoadError);
    CHECK_THROWS_AS(decode_checkpoint(bytes + "z"), LoadError);
}

TEST_CASE("loading into a different shape names the leaf") {
    Models a(tiny_model(), 3);
    auto wide = tiny_model();
    wide.embed_dim = 32;
    Models b(wide, 3);
    const auto ckpt = decode_checkpoint(encode_checkpoint(a.depth_params(), "{}"));
    try {
        load_params(ckpt, b.depth_params());
        FAIL("expected LoadError");
    } catch (const LoadError& e) {
        CHECK(std::string(e.what()).find("encoder.") != std::string::npos);
    }
}

TEST_CASE("base checkpoint lacks attached leaves unless allowed") {
    Models base(base_config(tiny_model()), 3), full(tiny_model(), 3);
    const auto ckpt = decode_checkpoint(encode_checkpoint(base.depth_params(), "{}"));
    CHECK_THROWS_AS(load_params(ckpt, full.depth_params()), LoadError);
    CHECK(load_params(ckpt, full.depth_params(), is_attached_leaf) == base.depth_params().size());
}

TEST_CASE("run config parsing") {
    const auto c = RunConfig::from_json(R"({"seed": 3, "model": {"embed_dim": 32, "adapter": "lora"},
        "optim": {"lr": 0.001, "decay_epoch": 2}, "train": {"epochs": 4}})");
    CHECK(c.seed == 3);
    CHECK(c.model.embed_dim == 32);
    CHECK(c.model.adapter == AdapterKind::LoRA);
    CHECK(c.lr_for_epoch(2) == doctest::Approx(1e-3));
    CHECK(c.lr_for_epoch(3) == doctest::Approx(1e-4));
    CHECK(RunConfig::from_json(c.to_json()).to_json() == c.to_json());
    CHECK_THROWS_AS(RunConfig::from_json(R"({"model": {"embed_dims": 32}})"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(R"({"tain": {}})"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(R"({"train": {"epochs": "many"}})"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(R"({"train": {"epochs": 0}})"), ConfigError);
    CHECK_THROWS_AS(RunConfig::from_json(R"({"seed": )"), ParseError);
    CHECK(model_from_json(model_to_json(tiny_model())).embed_dim == 16);
}

TEST_CASE("pretrain then finetune on a tiny scene") {
    const auto root = scratch_dir("train");
    write_dataset(tiny_scene("A"), root / "a");
    write_dataset(tiny_scene("B"), root / "b");

    auto pre = tiny_run(root / "a", root / "pre");
    const auto s1 = pretrain(pre);
    CHECK(s1.epoch_mean.size() == 2);
    CHECK(s1.steps.size() == 2);  // 3 train triplets, batch 2: one step per epoch
    CHECK(std::filesystem::exists(root / "pre" / "final.ckpt"));
    CHECK(std::filesystem::exists(root / "pre" / "epoch_001.ckpt"));
    CHECK(s1.depth_count.frozen == 0);
    CHECK(s1.depth_count.total == count_params(Models(base_config(tiny_model()), 0).depth_params()).total);

    auto ft = tiny_run(root / "b", root / "ft");
    ft.base_checkpoint = (root / "pre" / "final.ckpt").string();
    const auto before = content_hash(read_file(ft.base_checkpoint));
    const auto s2 = finetune(ft);
    CHECK(s2.base_hash_before == before);
    CHECK(s2.base_hash_after == before);
    CHECK(s2.depth_count.trainable > 0);
    CHECK(s2.depth_count.frozen > 0);

    // The log closes with the parameter counts of the depth network.
    const auto log = read_file(s2.log_path);
    const auto last = log.substr(log.rfind("params\t"));
    CHECK(last.find("depth_trainable=" + std::to_string(s2.depth_count.trainable) + "\t") != std::string::npos);
    CHECK(last.find("depth_total=" + std::to_string(s2.depth_count.total) + "\t") != std::string::npos);

    const auto models = load_models(s2.final_checkpoint);
    CHECK(models.depth.config().adapter == AdapterKind::RVLoRA);
    const auto data = load_dataset(root / "b", "test");
    const auto report = evaluate_depth_model(models, data, {}, root / "vis");
    CHECK(report.size() == data.samples.size());
    CHECK(report.mean().abs_rel > 0.0);
    CHECK(std::filesystem::exists(root / "vis" / "seq001_0001.ppm"));

    const auto poses = evaluate_pose_model(models, root / "b", "test");
    REQUIRE(poses.size() == 1);
    CHECK(poses[0].frames == 5);
    CHECK(poses[0].ate >= 0.0);

    auto none = ft;
    none.model.adapter = AdapterKind::None;
    none.model.res_dsc_count = 0;
    CHECK_THROWS_AS(finetune(none), ConfigError);

    auto missing = ft;
    missing.base_checkpoint = (root / "nope.ckpt").string();
    CHECK_THROWS_AS(finetune(missing), LoadError);
}

TEST_CASE("training is reproducible for a fixed seed") {
    const auto root = scratch_dir("repro");
    write_dataset(tiny_scene("A"), root / "a");
    auto c = tiny_run(root / "a", root / "r1");
    c.epochs = 1;
    pretrain(c);
    c.output_dir = (root / "r2").string();
    pretrain(c);
    CHECK(read_file(root / "r1" / "final.ckpt") == read_file(root / "r2" / "final.ckpt"));
    CHECK(read_file(root / "r1" / "pretrain.log") == read_file(root / "r2" / "pretrain.log"));
}

TEST_CASE("parameter breakdown sums to the network totals") {
    const auto rows = param_breakdown(tiny_model(), true);
    std::int64_t trainable = 0, total = 0;
    for (const auto& r : rows) {
        trainable += r.count.trainable;
        total += r.count.total;
    }
    Models m(tiny_model(), 0);
    m.depth.set_finetune_mode();
    const auto all = count_params(m.all_params());
    CHECK(total == all.total);
    CHECK(trainable == all.trainable);
}
