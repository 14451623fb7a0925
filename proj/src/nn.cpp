#include "edlb/nn.hpp"

#include <cmath>

namespace edlb {

template <typename T>
Conv2d<T>::Conv2d(int in_channels, int out_channels, int kernel, Conv2dOptions opt, bool with_bias, Rng& rng)
    : options(opt) {
    const int per_group = in_channels / opt.groups;
    const double bound = 1.0 / std::sqrt(static_cast<double>(per_group * kernel * kernel));
    weight = BasicTensor<T>::uniform({out_channels, per_group, kernel, kernel}, rng, -bound, bound, true);
    if (with_bias) bias = BasicTensor<T>::uniform({out_channels}, rng, -bound, bound, true);
}

template <typename T>
void Conv2d<T>::collect(ParamList<T>& out, const std::string& prefix) const {
    out.push_back({join_name(prefix, "weight"), weight});
    if (bias.defined()) out.push_back({join_name(prefix, "bias"), bias});
}

template <typename T>
void Conv2d<T>::zero() {
    for (auto& v : weight.mutable_data()) v = T(0);
    if (bias.defined()) {
        for (auto& v : bias.mutable_data()) v = T(0);
    }
}

template <typename T>
LayerNorm<T>::LayerNorm(int dim)
    : gamma(BasicTensor<T>::full({dim}, T(1), true)), beta(BasicTensor<T>::zeros({dim}, true)) {}

template <typename T>
void LayerNorm<T>::collect(ParamList<T>& out, const std::string& prefix) const {
    out.push_back({join_name(prefix, "gamma"), gamma});
    out.push_back({join_name(prefix, "beta"), beta});
}

template class Conv2d<float>;
template class Conv2d<double>;
template class LayerNorm<float>;
template class LayerNorm<double>;

}  // namespace edlb
