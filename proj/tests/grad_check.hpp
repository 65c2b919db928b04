#pragma once

// Central finite-difference gradient verification, independent of the tape's
// backward rules. Builders must be pure functions of their parameters; the
// graph is rebuilt twice per perturbed element, so keep test tensors small.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "gzm/tensor.hpp"

namespace gzm::test {

using ForwardFn = std::function<Tensor*(Tape&)>;

struct GradCheckResult {
    double max_rel_err = 0.0;
    int checked = 0;
};

// Relative error |a-n| / max(1, |a|, |n|) against central differences.
inline GradCheckResult grad_check(const ForwardFn& forward, const std::vector<Tensor*>& params,
                                  double eps = 1e-5) {
    for (Tensor* p : params) p->zero_grad();
    Tape tape;
    Tensor* loss = forward(tape);
    tape.backward(loss);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (Tensor* p : params) analytic.push_back(p->g);

    GradCheckResult res;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor* p = params[pi];
        for (std::size_t i = 0; i < p->v.size(); ++i) {
            const double keep = p->v[i];
            p->v[i] = keep + eps;
            Tape tp;
            const double fp = forward(tp)->scalar();
            p->v[i] = keep - eps;
            Tape tm;
            const double fm = forward(tm)->scalar();
            p->v[i] = keep;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double a = analytic[pi][i];
            const double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            res.max_rel_err = std::max(res.max_rel_err, rel);
            ++res.checked;
        }
    }
    return res;
}

}  // namespace gzm::test
