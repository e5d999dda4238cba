#pragma once

#include <functional>

#include "mov3d/tensor.h"

namespace mov3d {

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    double autodiff = 0.0;     // gradient at worst_index
    double finite_diff = 0.0;  // central difference at worst_index
};

// Compares backward() against central differences of a scalar function.
// Per element: |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|); reports the max.
// `f` must rebuild its graph from the tensor it is handed on every call.
GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double step = 1e-4);

// Convenience wrapper returning only the max relative error.
double grad_check_error(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double step = 1e-4);

}  // namespace mov3d
