#pragma once

#include <cstddef>
#include <functional>

#include "edlb/tensor.hpp"

namespace edlb {

struct GradCheckReport {
    double max_abs_error = 0.0;
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    std::size_t coordinates = 0;
    bool passed = false;
};

struct GradCheckOptions {
    double eps = 1e-4;
    double tol = 1e-5;
    // Relative error is |analytic - numeric| / max(|analytic|, |numeric|, rel_floor),
    // so coordinates whose true derivative is ~0 are judged in absolute terms.
    double rel_floor = 1e-3;
};

/// Compares the reverse-mode gradient of a scalar function against central
/// differences, one coordinate at a time. 64-bit only.
GradCheckReport grad_check(const std::function<Tensor64(const Tensor64&)>& f, const Tensor64& x,
                           GradCheckOptions options = {});

}  // namespace edlb
