#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "edlb/nn.hpp"

namespace edlb {

enum class AdapterKind { None, LoRA, RVLoRA };
enum class InitPolicy { KaimingUniform, KaimingNormal, Uniform };

std::string to_string(AdapterKind kind);
std::string to_string(InitPolicy policy);
AdapterKind parse_adapter_kind(const std::string& s);
InitPolicy parse_init_policy(const std::string& s);

/// Draws a tensor whose input dimension is `fan_in` under `policy`:
///   kaiming_uniform  U(-sqrt(6/fan_in), +sqrt(6/fan_in))
///   kaiming_normal   N(0, 2/fan_in)
///   uniform          U(-1/sqrt(fan_in), +1/sqrt(fan_in))
template <typename T>
BasicTensor<T> init_tensor(const Shape& shape, std::int64_t fan_in, InitPolicy policy, Rng& rng,
                           bool requires_grad);

/// Low-rank update `b * (B (a * (A x)))` for an m x n base weight.
///
/// For LoRA the scaling vectors are absent and the update is `B A x`.
/// For RVLoRA `a` (length r) and `b` (length m) are frozen random vectors
/// acting as the diagonal scalings; they are applied elementwise and never
/// expanded into matrices. B starts at zero so a freshly attached adapter
/// leaves the layer output unchanged.
template <typename T>
struct LowRankAdapter {
    AdapterKind kind = AdapterKind::LoRA;
    int rank = 0;
    BasicTensor<T> A;  // r x n, trainable
    BasicTensor<T> B;  // m x r, trainable
    BasicTensor<T> a;  // r, frozen (RVLoRA only)
    BasicTensor<T> b;  // m, frozen (RVLoRA only)

    std::int64_t out_features() const { return B.dim(0); }
    std::int64_t in_features() const { return A.dim(1); }

    // Delta-W as a dense m x n matrix (for merging and tests).
    std::vector<T> dense_delta() const;
};

/// Draw order is a, b, A from one stream seeded by `seed`.
template <typename T>
LowRankAdapter<T> init_rvlora(std::int64_t m, std::int64_t n, int r, std::uint64_t seed,
                              InitPolicy policy = InitPolicy::KaimingUniform);

template <typename T>
LowRankAdapter<T> init_lora(std::int64_t m, std::int64_t n, int r, std::uint64_t seed,
                            InitPolicy policy = InitPolicy::KaimingUniform);

/// Linear layer `W0 x + bias` with an optional low-rank adapter.
template <typename T>
class AdaptedLinear {
public:
    AdaptedLinear() = default;
    AdaptedLinear(std::int64_t out_features, std::int64_t in_features, bool with_bias, Rng& rng);
    AdaptedLinear(BasicTensor<T> weight, BasicTensor<T> bias);

    BasicTensor<T> forward(const BasicTensor<T>& x) const;
    BasicTensor<T> operator()(const BasicTensor<T>& x) const { return forward(x); }

    // Freezes W0 (and the bias unless `train_bias`) and attaches the adapter.
    void attach(LowRankAdapter<T> adapter, bool train_bias = false);
    void detach_adapter() { adapter_.reset(); }
    bool has_adapter() const { return adapter_.has_value(); }
    const std::optional<LowRankAdapter<T>>& adapter() const { return adapter_; }
    std::optional<LowRankAdapter<T>>& adapter() { return adapter_; }

    // Plain layer with W = W0 + diag(b) B diag(a) A; without an adapter, a copy.
    AdaptedLinear merged() const;

    void collect(ParamList<T>& out, const std::string& prefix) const;

    std::int64_t out_features() const { return weight_.dim(0); }
    std::int64_t in_features() const { return weight_.dim(1); }
    const BasicTensor<T>& weight() const { return weight_; }
    const BasicTensor<T>& bias() const { return bias_; }

private:
    BasicTensor<T> weight_;
    BasicTensor<T> bias_;
    std::optional<LowRankAdapter<T>> adapter_;
};

struct ParamCount {
    std::int64_t total = 0;
    std::int64_t trainable = 0;
    std::int64_t frozen = 0;
};

template <typename T>
ParamCount count_params(const ParamList<T>& params) {
    ParamCount c;
    for (const auto& p : params) {
        c.total += p.tensor.numel();
        (p.tensor.requires_grad() ? c.trainable : c.frozen) += p.tensor.numel();
    }
    return c;
}

}  // namespace edlb
