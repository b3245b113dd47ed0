#pragma once

// Ground-truth solvers for checking learned couplings:
//   * log-domain Sinkhorn for discrete entropic OT,
//   * a semi-relaxed Sinkhorn with a fixed source marginal and a KL-penalised
//     target marginal,
//   * exhaustive grid minimisation of the primal on tiny instances,
//   * the closed-form Gaussian-to-Gaussian entropic coupling.
//
// Discrete objective (quadratic cost supplied by the caller):
//   <C, P> + eps KL(P | a b')  [+ alpha_div KL(P' 1 | b)]
// with the generalised KL(p | q) = sum p log(p/q) - p + q.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sfeuot/matrix.hpp"

namespace sfeuot {

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DiscreteCoupling {
  Matrix plan;
  std::vector<double> source_weights;
  std::vector<double> target_weights;
  double epsilon = 1.0;
  std::size_t iterations = 0;
  double violation = 0.0;  // final marginal violation (L1) or potential change
  bool converged = true;
  std::vector<double> dual_trace;  // dual objective per iteration (Sinkhorn only)

  std::vector<double> row_sums() const;
  std::vector<double> col_sums() const;
  double total_mass() const;
};

enum class DivergenceMode { Balanced, SemiRelaxedKL };

double eot_objective(const Matrix& plan, const Matrix& cost, const std::vector<double>& a,
                     const std::vector<double>& b, double epsilon);
double semi_relaxed_objective(const Matrix& plan, const Matrix& cost, const std::vector<double>& a,
                              const std::vector<double>& b, double epsilon, double alpha_div);

/// Half squared Euclidean cost between the rows of xs and ys.
Matrix quadratic_cost(const Matrix& xs, const Matrix& ys);

struct SinkhornOptions {
  std::size_t max_iters = 100000;
  double tol = 1e-9;
  bool record_trace = false;
};

DiscreteCoupling sinkhorn_balanced(const Matrix& cost, const std::vector<double>& a,
                                   const std::vector<double>& b, double epsilon,
                                   SinkhornOptions opts = {});

DiscreteCoupling sinkhorn_semi_relaxed_kl(const Matrix& cost, const std::vector<double>& a,
                                          const std::vector<double>& b, double epsilon,
                                          double alpha_div, SinkhornOptions opts = {});

struct BruteForceOptions {
  std::size_t grid = 21;           // points per free coordinate
  std::size_t refinements = 8;     // zoom passes after the coarse pass
  double window_steps = 3.0;       // half-width of each zoom, in previous steps
};

/// Direct minimisation over the free entries (at most 4) of a plan whose first
/// marginal is fixed (and, for Balanced, the second as well). Throws
/// std::invalid_argument for larger instances.
DiscreteCoupling brute_force_tiny(const Matrix& cost, const std::vector<double>& a,
                                  const std::vector<double>& b, double epsilon,
                                  DivergenceMode mode, double alpha_div = 1.0,
                                  BruteForceOptions opts = {});

/// Minimiser of a strictly convex scalar function on [lo, hi].
template <class F>
double golden_section_minimize(F&& f, double lo, double hi, double tol = 1e-12) {
  const double invphi = 0.6180339887498949;
  double c = hi - invphi * (hi - lo);
  double d = lo + invphi * (hi - lo);
  double fc = f(c), fd = f(d);
  while (hi - lo > tol) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - invphi * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + invphi * (hi - lo);
      fd = f(d);
    }
  }
  return 0.5 * (lo + hi);
}

/// Joint Gaussian law of an entropic coupling between N(m0, S0) and N(m1, S1).
struct GaussianCoupling {
  Eigen::VectorXd mean;  // (m0, m1)
  Eigen::MatrixXd cov;   // [[S0, C], [C', S1]]

  Eigen::Index dim() const { return mean.size() / 2; }
  Eigen::VectorXd source_mean() const { return mean.head(dim()); }
  Eigen::VectorXd target_mean() const { return mean.tail(dim()); }
  Eigen::MatrixXd source_cov() const { return cov.topLeftCorner(dim(), dim()); }
  Eigen::MatrixXd target_cov() const { return cov.bottomRightCorner(dim(), dim()); }
  Eigen::MatrixXd cross_cov() const { return cov.topRightCorner(dim(), dim()); }
};

/// Cross-covariance
///   C = 1/2 S0^{1/2} ((4 S0^{1/2} S1 S0^{1/2} + sigma2^2 I)^{1/2} - sigma2 I) S0^{-1/2}
/// for the cost |x - y|^2 / 2 with entropy weight sigma2.
GaussianCoupling gaussian_eot_coupling(const Eigen::VectorXd& m0, const Eigen::MatrixXd& S0,
                                       const Eigen::VectorXd& m1, const Eigen::MatrixXd& S1,
                                       double sigma2);

/// Symmetric square root (and inverse square root) by eigendecomposition.
Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& s);
Eigen::MatrixXd sym_inv_sqrt(const Eigen::MatrixXd& s);

}  // namespace sfeuot
