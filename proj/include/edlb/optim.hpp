#pragma once

#include <vector>

#include "edlb/nn.hpp"

namespace edlb {

struct AdamOptions {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    // Global gradient-norm clip; 0 disables.
    double clip_norm = 0.0;
};

/// Adam over the trainable subset of a parameter list. Leaves that do not
/// require grad are never touched.
template <typename T>
class Adam {
public:
    Adam(const ParamList<T>& params, AdamOptions options);

    void step();
    void zero_grad();
    void set_lr(double lr) { options_.lr = lr; }
    double lr() const { return options_.lr; }
    std::size_t num_tensors() const { return params_.size(); }

private:
    struct Slot {
        BasicTensor<T> param;
        std::vector<double> m, v;
    };
    std::vector<Slot> params_;
    AdamOptions options_;
    long long t_ = 0;
};

}  // namespace edlb
