#include "mov3d/grad_check.h"

#include <algorithm>
#include <cmath>

#include "mov3d/error.h"

namespace mov3d {

GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double step) {
    Tensor probe = x.detach();
    probe.set_requires_grad(true);
    Tensor loss = f(probe);
    if (loss.numel() != 1) throw UsageError("grad_check: function must be scalar-valued");
    loss.backward();
    const std::vector<double> analytic = probe.grad();

    GradCheckResult result;
    std::vector<double> values(x.data().begin(), x.data().end());
    for (std::size_t i = 0; i < values.size(); ++i) {
        NoGradGuard no_grad;
        const double saved = values[i];
        values[i] = saved + step;
        const double up = f(Tensor(x.shape(), values)).item();
        values[i] = saved - step;
        const double down = f(Tensor(x.shape(), values)).item();
        values[i] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double err =
            std::abs(analytic[i] - numeric) / std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
        if (i == 0 || err > result.max_relative_error) {
            result.max_relative_error = err;
            result.worst_index = i;
            result.autodiff = analytic[i];
            result.finite_diff = numeric;
        }
    }
    return result;
}

double grad_check_error(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double step) {
    return grad_check(f, x, step).max_relative_error;
}

}  // namespace mov3d
