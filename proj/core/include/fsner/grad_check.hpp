#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "fsner/tensor.hpp"

namespace fsner {

struct GradCheckResult {
    std::vector<double> per_input_max;
    double overall_max = 0.0;
};

inline double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
    return std::fabs(analytic - numeric) / denom;
}

// Central finite differences against analytic gradients. `loss` re-evaluates
// the scalar objective from the current contents of `inputs`; each input is
// perturbed in place and restored. When h_alt > 0 every entry is also
// differenced at the alternate step and the better-conditioned result kept
// (small steps lose tiny gradients to roundoff, large steps lose curved ones
// to truncation). Reports, never asserts.
template <class T>
GradCheckResult grad_check(const std::function<T()>& loss, const std::vector<Tensor<T>*>& inputs,
                           const std::vector<const Tensor<T>*>& analytic, T h, T h_alt = T(0)) {
    GradCheckResult result;
    result.per_input_max.resize(inputs.size(), 0.0);
    for (size_t which = 0; which < inputs.size(); ++which) {
        Tensor<T>& x = *inputs[which];
        const Tensor<T>& g = *analytic[which];
        double worst = 0.0;
        for (size_t i = 0; i < x.v.size(); ++i) {
            const T saved = x.v[i];
            auto numeric_at = [&](T step) {
                x.v[i] = saved + step;
                const double up = double(loss());
                x.v[i] = saved - step;
                const double down = double(loss());
                x.v[i] = saved;
                return (up - down) / (2.0 * double(step));
            };
            double err = relative_error(double(g.v[i]), numeric_at(h));
            if (h_alt > T(0)) {
                err = std::min(err, relative_error(double(g.v[i]), numeric_at(h_alt)));
            }
            worst = std::max(worst, err);
        }
        result.per_input_max[which] = worst;
        result.overall_max = std::max(result.overall_max, worst);
    }
    return result;
}

}  // namespace fsner
