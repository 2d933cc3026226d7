#include "gir/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace gir {

void zero_grads(std::vector<Parameter>& params) {
  for (auto& p : params) p.value.zero_grad();
}

void sgd_step(std::vector<Parameter>& params, double lr) {
  for (auto& p : params) {
    if (!p.value.has_grad())
      throw std::runtime_error("sgd_step: parameter '" + p.name +
                               "' has no gradient");
    auto& g = p.value.grad();
    auto& d = p.value.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= lr * g[i];
  }
}

void Adam::step(std::vector<Parameter>& params) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i].value.size(), 0.0);
      v_[i].assign(params[i].value.size(), 0.0);
    }
  }
  if (m_.size() != params.size())
    throw std::runtime_error("Adam: parameter count changed between steps");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.value.has_grad())
      throw std::runtime_error("adam_step: parameter '" + p.name +
                               "' has no gradient");
    auto& g = p.value.grad();
    auto& d = p.value.data();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < d.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      const double mh = m[j] / bc1;
      const double vh = v[j] / bc2;
      d[j] -= lr_ * mh / (std::sqrt(vh) + eps_);
    }
  }
}

}  // namespace gir
