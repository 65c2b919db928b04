#include "gzm/optim.hpp"

#include <cmath>
#include <string>

#include "gzm/error.hpp"

namespace gzm {

Adam::Adam(std::vector<Tensor*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (Tensor* p : params_) {
        if (!p->requires_grad) throw param_error("adam: parameter without requires_grad");
        m_.emplace_back(p->v.size(), 0.0);
        v_.emplace_back(p->v.size(), 0.0);
    }
}

void Adam::step() {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        Tensor* p = params_[pi];
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (std::size_t i = 0; i < p->v.size(); ++i) {
            const double grad = p->g[i];
            if (!std::isfinite(grad)) {
                throw train_error("adam: non-finite gradient at step " + std::to_string(step_count_));
            }
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * grad;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * grad * grad;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p->v[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        if (!p->all_finite()) {
            throw train_error("adam: parameters diverged at step " + std::to_string(step_count_));
        }
    }
}

void Adam::zero_grad() {
    for (Tensor* p : params_) p->zero_grad();
}

}  // namespace gzm
