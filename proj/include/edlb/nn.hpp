#pragma once

#include <string>
#include <vector>

#include "edlb/ops.hpp"
#include "edlb/rng.hpp"

namespace edlb {

/// A parameter leaf with its stable dotted path (e.g. "encoder.block3.mlp.fc1.weight").
template <typename T>
struct NamedParam {
    std::string name;
    BasicTensor<T> tensor;
};

template <typename T>
using ParamList = std::vector<NamedParam<T>>;

inline std::string join_name(const std::string& prefix, const std::string& leaf) {
    return prefix.empty() ? leaf : prefix + "." + leaf;
}

template <typename T>
void set_trainable(const ParamList<T>& params, bool trainable) {
    for (const auto& p : params) {
        auto t = p.tensor;
        t.set_requires_grad(trainable);
    }
}

template <typename T>
class Conv2d {
public:
    Conv2d() = default;
    // Weights and bias uniform in +-1/sqrt(fan_in).
    Conv2d(int in_channels, int out_channels, int kernel, Conv2dOptions options, bool with_bias, Rng& rng);

    BasicTensor<T> operator()(const BasicTensor<T>& x) const { return conv2d(x, weight, bias, options); }
    void collect(ParamList<T>& out, const std::string& prefix) const;
    void zero();

    BasicTensor<T> weight;
    BasicTensor<T> bias;
    Conv2dOptions options;
};

template <typename T>
class LayerNorm {
public:
    LayerNorm() = default;
    explicit LayerNorm(int dim);

    BasicTensor<T> operator()(const BasicTensor<T>& x) const { return layernorm(x, gamma, beta); }
    void collect(ParamList<T>& out, const std::string& prefix) const;

    BasicTensor<T> gamma;
    BasicTensor<T> beta;
};

}  // namespace edlb
