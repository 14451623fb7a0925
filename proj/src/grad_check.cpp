#include "edlb/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "edlb/errors.hpp"

namespace edlb {

GradCheckReport grad_check(const std::function<Tensor64(const Tensor64&)>& f, const Tensor64& x,
                           GradCheckOptions options) {
    GradCheckReport report;
    Tensor64 leaf = x.detach();
    leaf.set_requires_grad(true);
    Tensor64 y = f(leaf);
    if (y.numel() != 1) throw ContractError("grad_check: function must return a scalar, got " + shape_str(y.shape()));
    y.backward();
    const std::vector<double> analytic = leaf.has_grad() ? std::vector<double>(leaf.grad().begin(), leaf.grad().end())
                                                         : std::vector<double>(leaf.numel(), 0.0);

    NoGradGuard no_grad;
    Tensor64 probe = x.detach();
    auto values = probe.mutable_data();
    report.coordinates = values.size();
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double orig = values[i];
        values[i] = orig + options.eps;
        const double up = f(probe).item();
        values[i] = orig - options.eps;
        const double down = f(probe).item();
        values[i] = orig;
        const double numeric = (up - down) / (2.0 * options.eps);
        const double abs_err = std::abs(analytic[i] - numeric);
        const double rel_err =
            abs_err / std::max({std::abs(analytic[i]), std::abs(numeric), options.rel_floor});
        report.max_abs_error = std::max(report.max_abs_error, abs_err);
        if (rel_err > report.max_rel_error) {
            report.max_rel_error = rel_err;
            report.worst_index = i;
        }
    }
    report.passed = std::isfinite(report.max_rel_error) && report.max_rel_error < options.tol;
    return report;
}

}  // namespace edlb
