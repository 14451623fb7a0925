#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "edlb/adapters.hpp"
#include "edlb/checkpoint.hpp"
#include "edlb/config.hpp"
#include "edlb/errors.hpp"
#include "edlb/eval.hpp"
#include "edlb/geometry.hpp"
#include "edlb/losses.hpp"
#include "edlb/synthdata.hpp"
#include "edlb/train.hpp"

namespace py = pybind11;
using namespace edlb;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Shape shape_of(const Array& a) {
    Shape s;
    for (py::ssize_t i = 0; i < a.ndim(); ++i) s.push_back(a.shape(i));
    return s;
}

Tensor64 to_tensor(const Array& a) {
    return Tensor64::from(shape_of(a), std::vector<double>(a.data(), a.data() + a.size()));
}

template <typename T>
py::array_t<double> to_array(const BasicTensor<T>& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> out(shape);
    auto d = t.data();
    std::copy(d.begin(), d.end(), out.mutable_data());
    return out;
}

void require_ndim(const Array& a, int ndim, const char* name) {
    if (a.ndim() != ndim) throw DimensionError(std::string(name) + " must have " + std::to_string(ndim) + " dimensions");
}

Intrinsics intrinsics(const std::array<double, 4>& k) { return {k[0], k[1], k[2], k[3]}; }

Vec3 vec3(const Array& a, const char* name) {
    if (a.size() != 3) throw DimensionError(std::string(name) + " must have 3 entries");
    return {a.data()[0], a.data()[1], a.data()[2]};
}

Mat3 mat3(const Array& a) {
    if (a.size() != 9) throw DimensionError("R must be 3x3");
    Mat3 m;
    std::copy(a.data(), a.data() + 9, m.begin());
    return m;
}

std::vector<Vec3> points(const Array& a, const char* name) {
    if (a.ndim() != 2 || a.shape(1) != 3) throw DimensionError(std::string(name) + " must be N x 3");
    std::vector<Vec3> out(a.shape(0));
    for (py::ssize_t i = 0; i < a.shape(0); ++i) out[i] = {a.at(i, 0), a.at(i, 1), a.at(i, 2)};
    return out;
}

py::dict metrics_dict(const DepthMetrics& m) {
    py::dict d;
    d["abs_rel"] = m.abs_rel;
    d["sq_rel"] = m.sq_rel;
    d["rmse"] = m.rmse;
    d["rmse_log"] = m.rmse_log;
    d["delta"] = m.delta;
    return d;
}

py::dict counts_dict(const ParamCount& c) {
    py::dict d;
    d["total"] = c.total;
    d["trainable"] = c.trainable;
    d["frozen"] = c.frozen;
    return d;
}

py::dict summary_dict(const TrainSummary& s) {
    py::dict d;
    d["epoch_mean"] = s.epoch_mean;
    d["steps"] = s.steps.size();
    d["depth"] = counts_dict(s.depth_count);
    d["aux"] = counts_dict(s.aux_count);
    d["checkpoint"] = s.final_checkpoint.string();
    d["log"] = s.log_path.string();
    if (!s.base_hash_before.empty()) d["base_hash"] = s.base_hash_before;
    return d;
}

LowRankAdapter<double> make_adapter(const std::string& kind, const Array& A, const Array& B, const std::optional<Array>& a,
                                    const std::optional<Array>& b) {
    LowRankAdapter<double> ad;
    ad.kind = parse_adapter_kind(kind);
    require_ndim(A, 2, "A");
    require_ndim(B, 2, "B");
    ad.rank = static_cast<int>(A.shape(0));
    ad.A = to_tensor(A);
    ad.B = to_tensor(B);
    if (ad.kind == AdapterKind::RVLoRA) {
        if (!a || !b) throw ContractError("rvlora needs the scaling vectors a and b");
        ad.a = to_tensor(*a);
        ad.b = to_tensor(*b);
    }
    return ad;
}

// Depth inference on a loaded checkpoint.
class DepthModel {
public:
    explicit DepthModel(const std::filesystem::path& checkpoint) : models_(load_models(checkpoint)) {}

    py::array_t<double> predict(const Array& image) const {
        require_ndim(image, 3, "image");
        const auto& c = models_.depth.config();
        if (image.shape(0) != 3 || image.shape(1) != c.height || image.shape(2) != c.width) {
            throw DimensionError("image must be 3 x " + std::to_string(c.height) + " x " + std::to_string(c.width));
        }
        std::vector<float> v(image.data(), image.data() + image.size());
        NoGradGuard guard;
        const Tensor disp = models_.depth.forward(Tensor::from({1, 3, c.height, c.width}, std::move(v)))[0];
        const Tensor depth = disp_to_depth(disp, c.min_depth, c.max_depth);
        return to_array(reshape(depth, {c.height, c.width}));
    }

    py::dict evaluate(const std::filesystem::path& data, const std::string& split, double cap, double min_depth) const {
        DepthEvalConfig eval{cap, min_depth};
        const auto report = evaluate_depth_model(models_, load_dataset(data, split), eval);
        py::dict d = metrics_dict(report.mean());
        d["images"] = report.size();
        return d;
    }

    std::string config() const { return model_to_json(models_.depth.config()); }
    py::dict param_count() const { return counts_dict(count_params(models_.depth_params())); }

private:
    Models models_;
};

}  // namespace

PYBIND11_MODULE(_edlb, m) {
    m.doc() = "Self-supervised monocular depth with low-rank adapters";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<ContractError>(m, "ContractError", PyExc_RuntimeError);
    py::register_exception<EvalError>(m, "EvalError", PyExc_RuntimeError);
    py::register_exception<LoadError>(m, "LoadError", PyExc_IOError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

    // Adapters
    m.def(
        "init_adapter",
        [](const std::string& kind, std::int64_t m_out, std::int64_t n_in, int rank, std::uint64_t seed, const std::string& init) {
            const auto k = parse_adapter_kind(kind);
            const auto policy = parse_init_policy(init);
            if (k == AdapterKind::None) throw ConfigError("adapter kind must be lora or rvlora");
            const auto ad = k == AdapterKind::RVLoRA ? init_rvlora<double>(m_out, n_in, rank, seed, policy)
                                                     : init_lora<double>(m_out, n_in, rank, seed, policy);
            py::dict d;
            d["A"] = to_array(ad.A);
            d["B"] = to_array(ad.B);
            if (k == AdapterKind::RVLoRA) {
                d["a"] = to_array(ad.a);
                d["b"] = to_array(ad.b);
            }
            return d;
        },
        py::arg("kind"), py::arg("m"), py::arg("n"), py::arg("rank"), py::arg("seed"), py::arg("init") = "kaiming_uniform",
        "Fresh adapter tensors for an m x n weight; B starts at zero.");
    m.def(
        "adapter_delta",
        [](const std::string& kind, const Array& A, const Array& B, std::optional<Array> a, std::optional<Array> b) {
            const auto ad = make_adapter(kind, A, B, a, b);
            return to_array(Tensor64::from({ad.out_features(), ad.in_features()}, ad.dense_delta()));
        },
        py::arg("kind"), py::arg("A"), py::arg("B"), py::arg("a") = py::none(), py::arg("b") = py::none(),
        "Dense weight update of an adapter.");
    m.def(
        "adapted_linear",
        [](const Array& x, const Array& W, std::optional<Array> bias, const std::string& kind, std::optional<Array> A,
           std::optional<Array> B, std::optional<Array> a, std::optional<Array> b) {
            AdaptedLinear<double> layer(to_tensor(W), bias ? to_tensor(*bias) : Tensor64{});
            if (kind != "none") {
                if (!A || !B) throw ContractError("adapter needs A and B");
                layer.attach(make_adapter(kind, *A, *B, a, b));
            }
            return to_array(layer(to_tensor(x)));
        },
        py::arg("x"), py::arg("W"), py::arg("bias") = py::none(), py::arg("kind") = "none", py::arg("A") = py::none(),
        py::arg("B") = py::none(), py::arg("a") = py::none(), py::arg("b") = py::none(),
        "x W^T + bias plus the adapter path, for x of shape [..., n].");

    // Geometry
    m.def(
        "reproject",
        [](const Array& depth, std::array<double, 4> K, const Array& R, const Array& t) {
            require_ndim(depth, 2, "depth");
            PoseSE3 pose{mat3(R), vec3(t, "t")};
            const auto rp = reproject(to_tensor(depth), intrinsics(K), pose);
            py::array_t<std::uint8_t> valid({depth.shape(0), depth.shape(1)});
            std::copy(rp.valid.begin(), rp.valid.end(), valid.mutable_data());
            return py::make_tuple(to_array(reshape(rp.coords, {depth.shape(0), depth.shape(1), 2})), valid);
        },
        py::arg("depth"), py::arg("K"), py::arg("R"), py::arg("t"),
        "Source pixel coordinates [H, W, 2] and validity for every target pixel.");
    m.def(
        "warp",
        [](const Array& src, const Array& coords, std::optional<py::array_t<std::uint8_t>> valid) {
            require_ndim(src, 3, "src");
            require_ndim(coords, 3, "coords");
            const Shape s = shape_of(src), c = shape_of(coords);
            std::vector<std::uint8_t> v(static_cast<std::size_t>(c[0] * c[1]), 1);
            if (valid) {
                if (static_cast<std::size_t>(valid->size()) != v.size()) throw DimensionError("valid must match coords");
                std::copy(valid->data(), valid->data() + valid->size(), v.begin());
            }
            const auto w = warp(reshape(to_tensor(src), {1, s[0], s[1], s[2]}), reshape(to_tensor(coords), {1, c[0], c[1], 2}), v);
            return py::make_tuple(to_array(reshape(w.image, {s[0], c[0], c[1]})), to_array(reshape(w.mask, {c[0], c[1]})));
        },
        py::arg("src"), py::arg("coords"), py::arg("valid") = py::none(),
        "Bilinear warp of src [C, H, W] to coords; returns (image, mask).");
    m.def(
        "photometric_error",
        [](const Array& pred, const Array& target) {
            require_ndim(pred, 3, "pred");
            const Shape s = shape_of(pred);
            const Shape n{1, s[0], s[1], s[2]};
            return to_array(reshape(photometric_error(reshape(to_tensor(pred), n), reshape(to_tensor(target), n)), {s[1], s[2]}));
        },
        py::arg("pred"), py::arg("target"), "Per-pixel SSIM + L1 error of two [C, H, W] images.");

    // Evaluation
    m.def(
        "depth_metrics",
        [](const Array& pred, const Array& gt, double cap, double min_depth) {
            if (pred.size() != gt.size()) throw DimensionError("pred and gt differ in size");
            return metrics_dict(evaluate_depth({pred.data(), static_cast<std::size_t>(pred.size())},
                                               {gt.data(), static_cast<std::size_t>(gt.size())}, {cap, min_depth}));
        },
        py::arg("pred"), py::arg("gt"), py::arg("cap") = 150.0, py::arg("min_depth") = 1e-3,
        "Median-scaled depth metrics of one image.");
    m.def(
        "ate",
        [](const Array& pred, const Array& gt) { return ate(points(pred, "pred"), points(gt, "gt")); }, py::arg("pred"),
        py::arg("gt"), "RMSE after similarity alignment of N x 3 positions.");
    m.def(
        "umeyama",
        [](const Array& src, const Array& dst) {
            const auto s = umeyama(points(src, "src"), points(dst, "dst"));
            py::array_t<double> R({3, 3});
            std::copy(s.R.begin(), s.R.end(), R.mutable_data());
            return py::make_tuple(s.scale, R, py::array_t<double>(3, s.t.data()));
        },
        py::arg("src"), py::arg("dst"), "(scale, R, t) mapping src onto dst.");

    // Data
    m.def("scene_spec", [](const std::string& preset) { return SceneSpec::preset(preset).to_json(); }, py::arg("preset") = "A",
          "Scene spec JSON of a domain preset.");
    m.def(
        "generate_dataset",
        [](const std::filesystem::path& out, const std::string& spec_json) {
            const auto s = write_dataset(SceneSpec::from_json(spec_json), out);
            py::dict d;
            d["sequences"] = s.sequences;
            d["frames"] = s.frames;
            d["train"] = s.train;
            d["val"] = s.val;
            d["test"] = s.test;
            return d;
        },
        py::arg("out_dir"), py::arg("spec_json") = "{}", "Render a dataset; returns triplet counts per split.");

    // Training
    m.def(
        "pretrain", [](const std::string& config_json) { return summary_dict(pretrain(RunConfig::from_json(config_json))); },
        py::arg("config_json"));
    m.def(
        "finetune", [](const std::string& config_json) { return summary_dict(finetune(RunConfig::from_json(config_json))); },
        py::arg("config_json"));
    m.def(
        "param_count",
        [](const std::string& model_json, bool finetune) {
            py::list rows;
            for (const auto& r : param_breakdown(model_from_json(model_json), finetune)) {
                py::dict d = counts_dict(r.count);
                d["module"] = r.module;
                rows.append(d);
            }
            return rows;
        },
        py::arg("model_json") = "{}", py::arg("finetune") = true, "Per-module parameter counts.");

    py::class_<DepthModel>(m, "DepthModel")
        .def(py::init<const std::filesystem::path&>(), py::arg("checkpoint"))
        .def("predict", &DepthModel::predict, py::arg("image"), "Depth map [H, W] of an image [3, H, W] in [0, 1].")
        .def("evaluate", &DepthModel::evaluate, py::arg("data"), py::arg("split") = "test", py::arg("cap") = 150.0,
             py::arg("min_depth") = 1e-3)
        .def("param_count", &DepthModel::param_count)
        .def_property_readonly("config", &DepthModel::config);
}
