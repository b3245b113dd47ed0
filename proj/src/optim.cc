#include "sfeuot/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "sfeuot/kernels.hpp"

namespace sfeuot {

Adam::Adam(std::size_t n_params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps), m_(n_params, 0.0), v_(n_params, 0.0) {
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("Adam: betas must lie in [0, 1)");
  }
}

void Adam::step(std::span<double> params, std::span<const double> grad, double lr) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw std::invalid_argument("Adam::step: size mismatch");
  }
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double mh = m_[i] / c1;
    const double vh = v_[i] / c2;
    params[i] -= lr * mh / (std::sqrt(vh) + eps_);
  }
}

double cosine_lr(double lr0, double lr_final, std::size_t k, std::size_t total) {
  if (total == 0) return lr0;
  if (k >= total) return lr_final;
  const double phase = std::numbers::pi * static_cast<double>(k) / static_cast<double>(total);
  return lr_final + 0.5 * (lr0 - lr_final) * (1.0 + std::cos(phase));
}

double global_norm(std::span<const double> grad) {
  return std::sqrt(kernels::active().dot(grad.size(), grad.data(), grad.data()));
}

double clip_global_norm(std::span<double> grad, double max_norm) {
  const double norm = global_norm(grad);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (double& g : grad) g *= s;
  }
  return norm;
}

}  // namespace sfeuot
