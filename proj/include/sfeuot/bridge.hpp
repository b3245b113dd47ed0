#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sfeuot/random.hpp"

namespace sfeuot {

/// Uniform grid {0, dt, ..., (N-1) dt} with dt = 1/N.
class TimeGrid {
 public:
  explicit TimeGrid(int n_steps);

  int n_steps() const { return n_steps_; }
  double dt() const { return 1.0 / n_steps_; }
  double point(int k) const { return static_cast<double>(k) / n_steps_; }
  std::vector<double> points() const;

 private:
  int n_steps_;
};

class TimeDistribution {
 public:
  enum class Kind { Uniform, Linear };

  TimeDistribution(Kind kind, TimeGrid grid);

  Kind kind() const { return kind_; }
  const TimeGrid& grid() const { return grid_; }

  /// Mass of grid point k. Linear: 2(k+1) / (N(N+1)).
  double mass(int k) const;
  std::vector<double> masses() const;

  /// Draws a grid index / grid time.
  int sample_index(Rng& rng) const;
  double sample(Rng& rng) const { return grid_.point(sample_index(rng)); }

 private:
  Kind kind_;
  TimeGrid grid_;
};

TimeDistribution::Kind parse_time_kind(std::string_view name);
std::string time_kind_name(TimeDistribution::Kind kind);

/// Brownian-bridge point between x (t=0) and y_hat (t=1):
///   (1-t) x + t y_hat + sigma sqrt(t(1-t)) eta.
void bridge_sample(std::span<const double> x, std::span<const double> y_hat, double t,
                   double sigma, std::span<const double> eta, std::span<double> out);
std::vector<double> bridge_sample(std::span<const double> x, std::span<const double> y_hat,
                                  double t, double sigma, std::span<const double> eta);

/// One conditional step of the bridge pinned at y_hat:
///   x_t + dt (y_hat - x_t)/(1-t) + sigma sqrt((1-t-dt) dt / (1-t)) eta.
/// Exactly y_hat when t + dt == 1.
void conditional_step(std::span<const double> x_t, std::span<const double> y_hat, double t,
                      double dt, double sigma, std::span<const double> eta,
                      std::span<double> out);
std::vector<double> conditional_step(std::span<const double> x_t, std::span<const double> y_hat,
                                     double t, double dt, double sigma,
                                     std::span<const double> eta);

/// Noise scale of conditional_step.
double conditional_step_noise(double t, double dt, double sigma);

}  // namespace sfeuot
