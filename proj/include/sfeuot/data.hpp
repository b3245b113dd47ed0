#pragma once

// Seeded samplers for the experimental distributions.
//
// Two-dimensional constructions (documented constants):
//   EightGaussian  mixture of N(m_i, s^2 I), m_i = 12 (cos(i pi/4), sin(i pi/4)),
//                  default s = 0.04, optional per-mode weights
//   Moon           two interleaved half circles of radius 1 (second one shifted
//                  by (1, -0.5)), noise std 0.05, centred and scaled by 8
//   Spiral         Archimedean r = 0.4 theta, theta ~ U[pi, 4 pi], noise std 0.1,
//                  scaled by 2

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sfeuot/matrix.hpp"
#include "sfeuot/oracles.hpp"
#include "sfeuot/random.hpp"

namespace sfeuot {

struct DatasetSpec {
  enum class Kind { StdGaussian, EightGaussian, Moon, Spiral, GaussianPair };

  Kind kind = Kind::StdGaussian;
  std::size_t dim = 2;
  std::uint64_t seed = 0;
  double component_std = 0.04;
  std::vector<double> mode_weights;  // EightGaussian only; empty means equal
  Eigen::VectorXd mean;              // GaussianPair only
  Eigen::MatrixXd cov;               // GaussianPair only

  /// Throws std::invalid_argument on an inconsistent spec.
  void validate() const;
};

inline constexpr double kEightGaussianRadius = 12.0;
inline constexpr double kMoonScale = 8.0;
inline constexpr double kSpiralScale = 2.0;

/// The eight mixture means, as an 8 x 2 matrix.
Matrix eight_gaussian_modes();

/// n i.i.d. rows.
Matrix sample(const DatasetSpec& spec, std::size_t n, Rng& rng);

/// n rows from a generator seeded with spec.seed (pure in (spec, n)).
Matrix sample(const DatasetSpec& spec, std::size_t n);

struct GaussianPairProblem {
  DatasetSpec source;
  DatasetSpec target;
  GaussianCoupling truth;
};

/// Standard Gaussian source; target mean ~ U[-1, 1]^dim and covariance
/// A A' / dim + 0.5 I with A standard normal, all drawn from `seed`. The
/// ground-truth coupling uses entropy weight sigma2.
GaussianPairProblem gaussian_pair(std::size_t dim, std::uint64_t seed, double sigma2 = 1.0);

/// Draws n pairs from a joint Gaussian: returns (x, y) as two n x d matrices.
std::pair<Matrix, Matrix> sample_coupling(const GaussianCoupling& gc, std::size_t n, Rng& rng);

}  // namespace sfeuot
