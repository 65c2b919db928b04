#pragma once

#include <cstdint>
#include <vector>

#include "gzm/tensor.hpp"

namespace gzm {

struct AdamConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adaptive-moment optimizer with bias correction. Deterministic: the update
/// depends only on parameters, gradients, and step count.
class Adam {
  public:
    Adam(std::vector<Tensor*> params, AdamConfig cfg = {});

    /// Apply one update from the gradients currently accumulated on the
    /// parameters. Throws train_error on non-finite gradients.
    void step();

    void zero_grad();

    void set_lr(double lr) { cfg_.lr = lr; }
    double lr() const { return cfg_.lr; }

    std::int64_t steps() const { return step_count_; }

  private:
    std::vector<Tensor*> params_;
    std::vector<std::vector<double>> m_;  // first moments, shape-congruent
    std::vector<std::vector<double>> v_;  // second moments
    AdamConfig cfg_;
    std::int64_t step_count_ = 0;
};

}  // namespace gzm
