#pragma once

#include <cmath>
#include <cstddef>
#include <functional>

#include "nbad/tensor.hpp"

namespace nbad {

// Central differences (f(x+e) - f(x-e)) / 2e per coordinate against the
// analytic gradient. Returns the worst relative error with denominator
// max(|analytic|, |numeric|, 1e-8). When stride > 1 only every stride-th
// coordinate is probed (for large inputs).
template <class T, class F>
double finite_diff_check(const TensorT<T>& x, const TensorT<T>& analytic_grad, F&& f,
                         double epsilon = 1e-5, std::size_t stride = 1) {
    TensorT<T> probe = x;
    double worst = 0.0;
    for (std::size_t i = 0; i < x.numel(); i += stride) {
        const T orig = probe.data[i];
        probe.data[i] = orig + static_cast<T>(epsilon);
        const double fp = static_cast<double>(f(probe));
        probe.data[i] = orig - static_cast<T>(epsilon);
        const double fm = static_cast<double>(f(probe));
        probe.data[i] = orig;
        const double numeric = (fp - fm) / (2.0 * epsilon);
        const double analytic = static_cast<double>(analytic_grad.data[i]);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
    return worst;
}

} // namespace nbad
