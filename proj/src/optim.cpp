#include "edlb/optim.hpp"

#include <cmath>

namespace edlb {

template <typename T>
Adam<T>::Adam(const ParamList<T>& params, AdamOptions options) : options_(options) {
    for (const auto& p : params) {
        if (!p.tensor.requires_grad()) continue;
        const auto n = static_cast<std::size_t>(p.tensor.numel());
        params_.push_back({p.tensor, std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)});
    }
}

template <typename T>
void Adam<T>::step() {
    ++t_;
    double scale = 1.0;
    if (options_.clip_norm > 0.0) {
        double sq = 0.0;
        for (const auto& s : params_) {
            if (!s.param.has_grad()) continue;
            for (T g : s.param.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
        }
        const double norm = std::sqrt(sq);
        if (norm > options_.clip_norm) scale = options_.clip_norm / norm;
    }
    const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
    for (auto& s : params_) {
        if (!s.param.has_grad()) continue;
        auto data = s.param.mutable_data();
        const auto grad = s.param.grad();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double g = static_cast<double>(grad[i]) * scale;
            s.m[i] = options_.beta1 * s.m[i] + (1.0 - options_.beta1) * g;
            s.v[i] = options_.beta2 * s.v[i] + (1.0 - options_.beta2) * g * g;
            const double mhat = s.m[i] / bc1;
            const double vhat = s.v[i] / bc2;
            data[i] = static_cast<T>(static_cast<double>(data[i]) - options_.lr * mhat / (std::sqrt(vhat) + options_.eps));
        }
    }
}

template <typename T>
void Adam<T>::zero_grad() {
    for (auto& s : params_) s.param.zero_grad();
}

template class Adam<float>;
template class Adam<double>;

}  // namespace edlb
