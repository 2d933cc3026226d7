#pragma once

#include <vector>

#include "gir/tensor.hpp"

namespace gir {

void zero_grads(std::vector<Parameter>& params);

/// Plain gradient step: p -= lr * grad. Throws if any grad is missing.
void sgd_step(std::vector<Parameter>& params, double lr);

/// Adam with per-parameter moment state, keyed by position in the vector.
class Adam {
 public:
  explicit Adam(double lr = 1e-4, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::vector<Parameter>& params);

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace gir
