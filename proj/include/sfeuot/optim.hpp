#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sfeuot {

/// Adaptive-moment optimizer with bias correction.
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n_params, double beta1, double beta2, double eps = 1e-8);

  /// params -= lr * m_hat / (sqrt(v_hat) + eps)
  void step(std::span<double> params, std::span<const double> grad, double lr);

  std::size_t steps() const { return steps_; }
  void set_steps(std::size_t s) { steps_ = s; }
  std::vector<double>& first_moment() { return m_; }
  std::vector<double>& second_moment() { return v_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }

 private:
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::size_t steps_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

/// lr_final + (lr0 - lr_final)(1 + cos(pi k / K)) / 2; lr0 when K == 0.
double cosine_lr(double lr0, double lr_final, std::size_t k, std::size_t total);

double global_norm(std::span<const double> grad);

/// Rescales grad in place so its norm is at most max_norm; returns the norm
/// before clipping.
double clip_global_norm(std::span<double> grad, double max_norm);

}  // namespace sfeuot
