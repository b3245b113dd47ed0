#pragma once

// Metrics comparing generated pairs (x, T(x)) against analytic or discrete
// ground truth.

#include <cstdint>
#include <string>
#include <vector>

#include "sfeuot/matrix.hpp"
#include "sfeuot/oracles.hpp"
#include "sfeuot/random.hpp"

namespace sfeuot {

struct MetricsRecord {
  std::string name;
  double value = 0.0;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
};

/// Relative errors in percent.
struct MomentErrors {
  double mean = 0.0;
  double var = 0.0;
  double cov = 0.0;
};

/// dm = |m1_hat - m1| / |m1|, dvar over the diagonal of the target covariance,
/// dcov = |C_hat - C|_F / |C|_F with C_hat the empirical cross-covariance of
/// (x, y). Throws std::invalid_argument with fewer than 2 pairs, mismatched
/// shapes or a zero-norm reference.
MomentErrors relative_moment_errors(const Matrix& x, const Matrix& y, const GaussianCoupling& truth);

/// mean of |x - y|^2 / 2 over rows.
double transport_cost(const Matrix& x, const Matrix& y);

/// Fraction of modes with at least one sample within radius.
double mode_coverage(const Matrix& samples, const Matrix& modes, double radius);

/// Fraction of samples whose nearest mode is k (rows of modes).
std::vector<double> mode_frequencies(const Matrix& samples, const Matrix& modes);

/// Concatenates two n x d matrices column-wise into n x 2d joint samples.
Matrix join_columns(const Matrix& x, const Matrix& y);

/// V-statistic energy distance 2 E|A-B| - E|A-A'| - E|B-B'|. Exactly zero for
/// identical sets and never negative (up to rounding).
double energy_distance(const Matrix& a, const Matrix& b);

/// Quantile of the energy distance under random relabelling of the pooled
/// sample, over n_perm permutations.
double energy_distance_null(const Matrix& a, const Matrix& b, std::size_t n_perm, double quantile,
                            Rng& rng);

/// n pairs drawn from a discrete plan over (source atoms, target atoms).
std::pair<Matrix, Matrix> sample_discrete_coupling(const Matrix& plan, const Matrix& source,
                                                   const Matrix& target, std::size_t n, Rng& rng);

}  // namespace sfeuot
