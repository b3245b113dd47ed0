#include "sfeuot/bridge.hpp"

#include <cmath>
#include <stdexcept>

namespace sfeuot {

TimeGrid::TimeGrid(int n_steps) : n_steps_(n_steps) {
  if (n_steps < 1) throw std::invalid_argument("TimeGrid: n_steps must be positive");
}

std::vector<double> TimeGrid::points() const {
  std::vector<double> p(static_cast<std::size_t>(n_steps_));
  for (int k = 0; k < n_steps_; ++k) p[static_cast<std::size_t>(k)] = point(k);
  return p;
}

TimeDistribution::TimeDistribution(Kind kind, TimeGrid grid) : kind_(kind), grid_(grid) {}

double TimeDistribution::mass(int k) const {
  const int n = grid_.n_steps();
  if (k < 0 || k >= n) return 0.0;
  if (kind_ == Kind::Uniform) return 1.0 / n;
  return 2.0 * (k + 1) / (static_cast<double>(n) * (n + 1));
}

std::vector<double> TimeDistribution::masses() const {
  std::vector<double> m(static_cast<std::size_t>(grid_.n_steps()));
  for (int k = 0; k < grid_.n_steps(); ++k) m[static_cast<std::size_t>(k)] = mass(k);
  return m;
}

int TimeDistribution::sample_index(Rng& rng) const {
  const int n = grid_.n_steps();
  if (kind_ == Kind::Uniform) return static_cast<int>(uniform_index(rng, static_cast<std::size_t>(n)));
  // Inverse CDF in integer units: P(index <= k) = (k+1)(k+2) / (N(N+1)).
  const auto total = static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n + 1);
  const auto u = static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(total)) % total;
  int k = 0;
  while (static_cast<std::uint64_t>(k + 1) * static_cast<std::uint64_t>(k + 2) <= u) ++k;
  return k;
}

TimeDistribution::Kind parse_time_kind(std::string_view name) {
  if (name == "uniform") return TimeDistribution::Kind::Uniform;
  if (name == "linear") return TimeDistribution::Kind::Linear;
  throw std::invalid_argument("unknown time distribution '" + std::string(name) +
                              "' (expected uniform or linear)");
}

std::string time_kind_name(TimeDistribution::Kind kind) {
  return kind == TimeDistribution::Kind::Uniform ? "uniform" : "linear";
}

void bridge_sample(std::span<const double> x, std::span<const double> y_hat, double t,
                   double sigma, std::span<const double> eta, std::span<double> out) {
  if (x.size() != y_hat.size() || x.size() != eta.size() || x.size() != out.size()) {
    throw std::invalid_argument("bridge_sample: dimension mismatch");
  }
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("bridge_sample: t outside [0, 1]");
  if (t == 0.0) {
    std::copy(x.begin(), x.end(), out.begin());
    return;
  }
  if (t == 1.0) {
    std::copy(y_hat.begin(), y_hat.end(), out.begin());
    return;
  }
  const double noise = sigma * std::sqrt(t * (1.0 - t));
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = (1.0 - t) * x[i] + t * y_hat[i] + noise * eta[i];
  }
}

std::vector<double> bridge_sample(std::span<const double> x, std::span<const double> y_hat,
                                  double t, double sigma, std::span<const double> eta) {
  std::vector<double> out(x.size());
  bridge_sample(x, y_hat, t, sigma, eta, out);
  return out;
}

double conditional_step_noise(double t, double dt, double sigma) {
  const double rest = 1.0 - t - dt;
  if (rest <= 1e-12) return 0.0;
  return sigma * std::sqrt(rest * dt / (1.0 - t));
}

void conditional_step(std::span<const double> x_t, std::span<const double> y_hat, double t,
                      double dt, double sigma, std::span<const double> eta,
                      std::span<double> out) {
  if (x_t.size() != y_hat.size() || x_t.size() != eta.size() || x_t.size() != out.size()) {
    throw std::invalid_argument("conditional_step: dimension mismatch");
  }
  if (!(t < 1.0)) throw std::invalid_argument("conditional_step: t must be < 1");
  // Grid points are k/N and dt = 1/N; allow rounding at the last step.
  if (t + dt > 1.0 + 1e-12) throw std::invalid_argument("conditional_step: t + dt exceeds 1");
  if (t + dt >= 1.0 - 1e-12) {
    std::copy(y_hat.begin(), y_hat.end(), out.begin());
    return;
  }
  const double drift = dt / (1.0 - t);
  const double noise = conditional_step_noise(t, dt, sigma);
  for (std::size_t i = 0; i < x_t.size(); ++i) {
    out[i] = x_t[i] + (y_hat[i] - x_t[i]) * drift + noise * eta[i];
  }
}

std::vector<double> conditional_step(std::span<const double> x_t, std::span<const double> y_hat,
                                     double t, double dt, double sigma,
                                     std::span<const double> eta) {
  std::vector<double> out(x_t.size());
  conditional_step(x_t, y_hat, t, dt, sigma, eta, out);
  return out;
}

}  // namespace sfeuot
