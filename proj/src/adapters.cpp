#include "edlb/adapters.hpp"

#include <cmath>

#include "edlb/errors.hpp"

namespace edlb {

std::string to_string(AdapterKind kind) {
    switch (kind) {
        case AdapterKind::None: return "none";
        case AdapterKind::LoRA: return "lora";
        case AdapterKind::RVLoRA: return "rvlora";
    }
    return "?";
}

std::string to_string(InitPolicy policy) {
    switch (policy) {
        case InitPolicy::KaimingUniform: return "kaiming_uniform";
        case InitPolicy::KaimingNormal: return "kaiming_normal";
        case InitPolicy::Uniform: return "uniform";
    }
    return "?";
}

AdapterKind parse_adapter_kind(const std::string& s) {
    if (s == "none") return AdapterKind::None;
    if (s == "lora") return AdapterKind::LoRA;
    if (s == "rvlora") return AdapterKind::RVLoRA;
    throw ConfigError("unknown adapter kind '" + s + "' (expected none, lora or rvlora)");
}

InitPolicy parse_init_policy(const std::string& s) {
    if (s == "kaiming_uniform") return InitPolicy::KaimingUniform;
    if (s == "kaiming_normal") return InitPolicy::KaimingNormal;
    if (s == "uniform") return InitPolicy::Uniform;
    throw ConfigError("unknown init policy '" + s + "' (expected kaiming_uniform, kaiming_normal or uniform)");
}

template <typename T>
BasicTensor<T> init_tensor(const Shape& shape, std::int64_t fan_in, InitPolicy policy, Rng& rng,
                           bool requires_grad) {
    const double f = static_cast<double>(fan_in);
    switch (policy) {
        case InitPolicy::KaimingUniform: {
            const double bound = std::sqrt(6.0 / f);
            return BasicTensor<T>::uniform(shape, rng, -bound, bound, requires_grad);
        }
        case InitPolicy::KaimingNormal:
            return BasicTensor<T>::normal(shape, rng, 0.0, std::sqrt(2.0 / f), requires_grad);
        case InitPolicy::Uniform: {
            const double bound = 1.0 / std::sqrt(f);
            return BasicTensor<T>::uniform(shape, rng, -bound, bound, requires_grad);
        }
    }
    throw ConfigError("invalid init policy");
}

namespace {

void check_rank(std::int64_t m, std::int64_t n, int r) {
    if (r < 1 || r > std::min(m, n)) {
        throw ConfigError("adapter rank " + std::to_string(r) + " must be in [1, " + std::to_string(std::min(m, n)) +
                          "] for a " + std::to_string(m) + "x" + std::to_string(n) + " weight");
    }
}

}  // namespace

template <typename T>
LowRankAdapter<T> init_rvlora(std::int64_t m, std::int64_t n, int r, std::uint64_t seed, InitPolicy policy) {
    check_rank(m, n, r);
    Rng rng(seed);
    LowRankAdapter<T> ad;
    ad.kind = AdapterKind::RVLoRA;
    ad.rank = r;
    ad.a = init_tensor<T>({r}, r, policy, rng, false);
    ad.b = init_tensor<T>({m}, m, policy, rng, false);
    ad.A = init_tensor<T>({r, n}, n, policy, rng, true);
    ad.B = BasicTensor<T>::zeros({m, r}, true);
    return ad;
}

template <typename T>
LowRankAdapter<T> init_lora(std::int64_t m, std::int64_t n, int r, std::uint64_t seed, InitPolicy policy) {
    check_rank(m, n, r);
    Rng rng(seed);
    LowRankAdapter<T> ad;
    ad.kind = AdapterKind::LoRA;
    ad.rank = r;
    ad.A = init_tensor<T>({r, n}, n, policy, rng, true);
    ad.B = BasicTensor<T>::zeros({m, r}, true);
    return ad;
}

template <typename T>
std::vector<T> LowRankAdapter<T>::dense_delta() const {
    const std::int64_t m = out_features(), n = in_features();
    std::vector<T> delta(static_cast<std::size_t>(m * n), T(0));
    const auto pA = A.data();
    const auto pB = B.data();
    for (std::int64_t i = 0; i < m; ++i) {
        const T bi = b.defined() ? b.data()[i] : T(1);
        for (int k = 0; k < rank; ++k) {
            const T coef = bi * pB[i * rank + k] * (a.defined() ? a.data()[k] : T(1));
            if (coef == T(0)) continue;
            for (std::int64_t j = 0; j < n; ++j) delta[i * n + j] += coef * pA[k * n + j];
        }
    }
    return delta;
}

template <typename T>
AdaptedLinear<T>::AdaptedLinear(std::int64_t out_features, std::int64_t in_features, bool with_bias, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_features));
    weight_ = BasicTensor<T>::uniform({out_features, in_features}, rng, -bound, bound, true);
    if (with_bias) bias_ = BasicTensor<T>::uniform({out_features}, rng, -bound, bound, true);
}

template <typename T>
AdaptedLinear<T>::AdaptedLinear(BasicTensor<T> weight, BasicTensor<T> bias)
    : weight_(std::move(weight)), bias_(std::move(bias)) {
    if (weight_.ndim() != 2) throw DimensionError("AdaptedLinear: weight must be 2-D, got " + shape_str(weight_.shape()));
    if (bias_.defined() && bias_.shape() != Shape{weight_.dim(0)}) {
        throw DimensionError("AdaptedLinear: bias " + shape_str(bias_.shape()) + " does not match weight " +
                             shape_str(weight_.shape()));
    }
}

template <typename T>
BasicTensor<T> AdaptedLinear<T>::forward(const BasicTensor<T>& x) const {
    BasicTensor<T> h = linear(x, weight_, bias_);
    if (!adapter_) return h;
    const auto& ad = *adapter_;
    BasicTensor<T> u = linear(x, ad.A, BasicTensor<T>());
    if (ad.a.defined()) u = mul(u, ad.a);
    BasicTensor<T> v = linear(u, ad.B, BasicTensor<T>());
    if (ad.b.defined()) v = mul(v, ad.b);
    return add(h, v);
}

template <typename T>
void AdaptedLinear<T>::attach(LowRankAdapter<T> adapter, bool train_bias) {
    if (adapter.out_features() != out_features() || adapter.in_features() != in_features()) {
        throw DimensionError("adapter for " + std::to_string(adapter.out_features()) + "x" +
                             std::to_string(adapter.in_features()) + " cannot attach to weight " +
                             shape_str(weight_.shape()));
    }
    weight_.set_requires_grad(false);
    if (bias_.defined()) bias_.set_requires_grad(train_bias);
    adapter_ = std::move(adapter);
}

template <typename T>
AdaptedLinear<T> AdaptedLinear<T>::merged() const {
    std::vector<T> w(weight_.data().begin(), weight_.data().end());
    if (adapter_) {
        const auto delta = adapter_->dense_delta();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] += delta[i];
    }
    BasicTensor<T> bias = bias_.defined() ? bias_.detach() : BasicTensor<T>();
    return AdaptedLinear<T>(BasicTensor<T>::from(weight_.shape(), std::move(w)), std::move(bias));
}

template <typename T>
void AdaptedLinear<T>::collect(ParamList<T>& out, const std::string& prefix) const {
    out.push_back({join_name(prefix, "weight"), weight_});
    if (bias_.defined()) out.push_back({join_name(prefix, "bias"), bias_});
    if (!adapter_) return;
    const std::string sub = join_name(prefix, adapter_->kind == AdapterKind::RVLoRA ? "rvlora" : "lora");
    out.push_back({join_name(sub, "A"), adapter_->A});
    out.push_back({join_name(sub, "B"), adapter_->B});
    if (adapter_->a.defined()) out.push_back({join_name(sub, "a"), adapter_->a});
    if (adapter_->b.defined()) out.push_back({join_name(sub, "b"), adapter_->b});
}

template BasicTensor<float> init_tensor(const Shape&, std::int64_t, InitPolicy, Rng&, bool);
template BasicTensor<double> init_tensor(const Shape&, std::int64_t, InitPolicy, Rng&, bool);
template struct LowRankAdapter<float>;
template struct LowRankAdapter<double>;
template LowRankAdapter<float> init_rvlora(std::int64_t, std::int64_t, int, std::uint64_t, InitPolicy);
template LowRankAdapter<double> init_rvlora(std::int64_t, std::int64_t, int, std::uint64_t, InitPolicy);
template LowRankAdapter<float> init_lora(std::int64_t, std::int64_t, int, std::uint64_t, InitPolicy);
template LowRankAdapter<double> init_lora(std::int64_t, std::int64_t, int, std::uint64_t, InitPolicy);
template class AdaptedLinear<float>;
template class AdaptedLinear<double>;

}  // namespace edlb
