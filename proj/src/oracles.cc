#include "sfeuot/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace sfeuot {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(const double* v, std::size_t n) {
  double mx = kNegInf;
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, v[i]);
  if (mx == kNegInf) return kNegInf;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - mx);
  return mx + std::log(s);
}

void check_problem(const Matrix& cost, const std::vector<double>& a, const std::vector<double>& b,
                   double epsilon) {
  if (cost.rows() != a.size() || cost.cols() != b.size() || a.empty() || b.empty()) {
    throw std::invalid_argument("oracle: cost / weight shape mismatch");
  }
  if (!(epsilon > 0.0 && std::isfinite(epsilon))) {
    throw std::invalid_argument("oracle: epsilon must be positive");
  }
  for (double w : a) {
    if (!(w > 0.0)) throw std::invalid_argument("oracle: source weights must be positive");
  }
  for (double w : b) {
    if (!(w > 0.0)) throw std::invalid_argument("oracle: target weights must be positive");
  }
}

double xlogx_rel(double p, double q) {
  // p log(p/q) - p + q, with 0 log 0 = 0
  if (p <= 0.0) return q;
  return p * std::log(p / q) - p + q;
}

// Shared log-domain state for both Sinkhorn variants.
struct LogSinkhorn {
  const Matrix& cost;
  Matrix cost_t;
  std::vector<double> la, lb, f, g;
  double eps;
  std::vector<double> scratch;

  LogSinkhorn(const Matrix& c, const std::vector<double>& a, const std::vector<double>& b, double e)
      : cost(c), cost_t(c.cols(), c.rows()), la(a.size()), lb(b.size()), f(a.size(), 0.0),
        g(b.size(), 0.0), eps(e) {
    for (std::size_t i = 0; i < c.rows(); ++i) {
      for (std::size_t j = 0; j < c.cols(); ++j) cost_t(j, i) = c(i, j);
    }
    for (std::size_t i = 0; i < a.size(); ++i) la[i] = std::log(a[i]);
    for (std::size_t j = 0; j < b.size(); ++j) lb[j] = std::log(b[j]);
  }

  // Exact row projection: -eps * log sum_j b_j exp((g_j - C_ij)/eps)
  void update_f() {
    const std::size_t m = g.size();
    scratch.resize(m);
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double* c = cost.row(i).data();
      for (std::size_t j = 0; j < m; ++j) scratch[j] = (g[j] - c[j]) / eps + lb[j];
      f[i] = -eps * log_sum_exp(scratch.data(), m);
    }
  }

  // Column soft-min times a damping factor (1 for the balanced problem).
  void update_g(double damping) {
    const std::size_t n = f.size();
    scratch.resize(n);
    for (std::size_t j = 0; j < g.size(); ++j) {
      const double* c = cost_t.row(j).data();
      for (std::size_t i = 0; i < n; ++i) scratch[i] = (f[i] - c[i]) / eps + la[i];
      g[j] = -damping * eps * log_sum_exp(scratch.data(), n);
    }
  }

  double log_plan(std::size_t i, std::size_t j) const {
    return (f[i] + g[j] - cost(i, j)) / eps + la[i] + lb[j];
  }

  double row_violation(const std::vector<double>& a) const {
    double v = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < g.size(); ++j) s += std::exp(log_plan(i, j));
      v += std::abs(s - a[i]);
    }
    return v;
  }

  Matrix plan() const {
    Matrix p(f.size(), g.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
      for (std::size_t j = 0; j < g.size(); ++j) p(i, j) = std::exp(log_plan(i, j));
    }
    return p;
  }
};

}  // namespace

std::vector<double> DiscreteCoupling::row_sums() const {
  std::vector<double> r(plan.rows(), 0.0);
  for (std::size_t i = 0; i < plan.rows(); ++i) {
    for (std::size_t j = 0; j < plan.cols(); ++j) r[i] += plan(i, j);
  }
  return r;
}

std::vector<double> DiscreteCoupling::col_sums() const {
  std::vector<double> c(plan.cols(), 0.0);
  for (std::size_t i = 0; i < plan.rows(); ++i) {
    for (std::size_t j = 0; j < plan.cols(); ++j) c[j] += plan(i, j);
  }
  return c;
}

double DiscreteCoupling::total_mass() const {
  double s = 0.0;
  for (double v : plan.storage()) s += v;
  return s;
}

double eot_objective(const Matrix& plan, const Matrix& cost, const std::vector<double>& a,
                     const std::vector<double>& b, double epsilon) {
  double obj = 0.0;
  for (std::size_t i = 0; i < plan.rows(); ++i) {
    for (std::size_t j = 0; j < plan.cols(); ++j) {
      obj += plan(i, j) * cost(i, j) + epsilon * xlogx_rel(plan(i, j), a[i] * b[j]);
    }
  }
  return obj;
}

double semi_relaxed_objective(const Matrix& plan, const Matrix& cost, const std::vector<double>& a,
                              const std::vector<double>& b, double epsilon, double alpha_div) {
  double obj = eot_objective(plan, cost, a, b, epsilon);
  for (std::size_t j = 0; j < plan.cols(); ++j) {
    double c = 0.0;
    for (std::size_t i = 0; i < plan.rows(); ++i) c += plan(i, j);
    obj += alpha_div * xlogx_rel(c, b[j]);
  }
  return obj;
}

Matrix quadratic_cost(const Matrix& xs, const Matrix& ys) {
  if (xs.cols() != ys.cols()) throw std::invalid_argument("quadratic_cost: dimension mismatch");
  Matrix c(xs.rows(), ys.rows());
  for (std::size_t i = 0; i < xs.rows(); ++i) {
    for (std::size_t j = 0; j < ys.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < xs.cols(); ++k) {
        const double d = xs(i, k) - ys(j, k);
        s += d * d;
      }
      c(i, j) = 0.5 * s;
    }
  }
  return c;
}

DiscreteCoupling sinkhorn_balanced(const Matrix& cost, const std::vector<double>& a,
                                   const std::vector<double>& b, double epsilon,
                                   SinkhornOptions opts) {
  check_problem(cost, a, b, epsilon);
  LogSinkhorn s(cost, a, b, epsilon);
  DiscreteCoupling out;
  out.converged = false;
  for (std::size_t it = 1; it <= opts.max_iters; ++it) {
    s.update_f();
    s.update_g(1.0);
    out.iterations = it;
    if (opts.record_trace) {
      // Columns are exact after the g step, so the plan has unit mass and the
      // dual reduces to <a, f> + <b, g>.
      double dual = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) dual += a[i] * s.f[i];
      for (std::size_t j = 0; j < b.size(); ++j) dual += b[j] * s.g[j];
      out.dual_trace.push_back(dual);
    }
    out.violation = s.row_violation(a);
    if (out.violation < opts.tol) {
      out.converged = true;
      break;
    }
  }
  out.plan = s.plan();
  out.source_weights = a;
  out.target_weights = b;
  out.epsilon = epsilon;
  return out;
}

DiscreteCoupling sinkhorn_semi_relaxed_kl(const Matrix& cost, const std::vector<double>& a,
                                          const std::vector<double>& b, double epsilon,
                                          double alpha_div, SinkhornOptions opts) {
  check_problem(cost, a, b, epsilon);
  if (!(alpha_div > 0.0)) throw std::invalid_argument("semi-relaxed sinkhorn: alpha_div must be positive");
  LogSinkhorn s(cost, a, b, epsilon);
  const double damping = alpha_div / (alpha_div + epsilon);
  DiscreteCoupling out;
  out.converged = false;
  std::vector<double> f_prev, g_prev;
  for (std::size_t it = 1; it <= opts.max_iters; ++it) {
    f_prev = s.f;
    g_prev = s.g;
    s.update_f();
    s.update_g(damping);
    out.iterations = it;
    double change = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) change = std::max(change, std::abs(s.f[i] - f_prev[i]));
    for (std::size_t j = 0; j < b.size(); ++j) change = std::max(change, std::abs(s.g[j] - g_prev[j]));
    out.violation = change;
    if (change < opts.tol) {
      out.converged = true;
      break;
    }
  }
  s.update_f();  // land exactly on the fixed source marginal
  out.plan = s.plan();
  out.source_weights = a;
  out.target_weights = b;
  out.epsilon = epsilon;
  return out;
}

DiscreteCoupling brute_force_tiny(const Matrix& cost, const std::vector<double>& a,
                                  const std::vector<double>& b, double epsilon,
                                  DivergenceMode mode, double alpha_div, BruteForceOptions opts) {
  check_problem(cost, a, b, epsilon);
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  if (n > 3 || m > 3) throw std::invalid_argument("brute_force_tiny: instance larger than 3x3");
  const bool balanced = mode == DivergenceMode::Balanced;
  const std::size_t free_rows = balanced ? n - 1 : n;
  const std::size_t free_cols = m - 1;
  const std::size_t n_free = free_rows * free_cols;
  if (n_free > 4) throw std::invalid_argument("brute_force_tiny: more than 4 free parameters");
  if (opts.grid < 3) throw std::invalid_argument("brute_force_tiny: grid must have >= 3 points");

  Matrix plan(n, m);
  // Fills the dependent entries; returns false when the plan is infeasible.
  auto assemble = [&](const std::vector<double>& x) {
    for (std::size_t i = 0; i < free_rows; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < free_cols; ++j) {
        plan(i, j) = x[i * free_cols + j];
        s += plan(i, j);
      }
      plan(i, m - 1) = a[i] - s;
      if (plan(i, m - 1) < 0.0) return false;
    }
    if (balanced) {
      for (std::size_t j = 0; j < m; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) s += plan(i, j);
        plan(n - 1, j) = b[j] - s;
        if (plan(n - 1, j) < 0.0) return false;
      }
      double last_row = 0.0;
      for (std::size_t j = 0; j < m; ++j) last_row += plan(n - 1, j);
      if (std::abs(last_row - a[n - 1]) > 1e-9) return false;
    }
    return true;
  };
  auto objective = [&](const std::vector<double>& x) {
    if (!assemble(x)) return std::numeric_limits<double>::infinity();
    return balanced ? eot_objective(plan, cost, a, b, epsilon)
                    : semi_relaxed_objective(plan, cost, a, b, epsilon, alpha_div);
  };

  std::vector<double> lo(n_free), hi(n_free);
  for (std::size_t i = 0; i < free_rows; ++i) {
    for (std::size_t j = 0; j < free_cols; ++j) {
      lo[i * free_cols + j] = 0.0;
      hi[i * free_cols + j] = balanced ? std::min(a[i], b[j]) : a[i];
    }
  }

  const std::vector<double> hi0 = hi;
  std::vector<double> best(n_free), x(n_free);
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<double> step(n_free);
  std::function<void(std::size_t)> sweep = [&](std::size_t k) {
    if (k == n_free) {
      const double v = objective(x);
      if (v < best_val) {
        best_val = v;
        best = x;
      }
      return;
    }
    for (std::size_t g = 0; g < opts.grid; ++g) {
      x[k] = lo[k] + step[k] * static_cast<double>(g);
      sweep(k + 1);
    }
  };

  for (std::size_t pass = 0; pass <= opts.refinements; ++pass) {
    for (std::size_t k = 0; k < n_free; ++k) {
      step[k] = (hi[k] - lo[k]) / static_cast<double>(opts.grid - 1);
    }
    sweep(0);
    for (std::size_t k = 0; k < n_free; ++k) {
      const double w = opts.window_steps * step[k];
      lo[k] = std::max(0.0, best[k] - w);
      hi[k] = std::min(hi0[k], best[k] + w);
    }
  }

  DiscreteCoupling out;
  assemble(best);
  out.plan = plan;
  out.source_weights = a;
  out.target_weights = b;
  out.epsilon = epsilon;
  out.iterations = opts.refinements + 1;
  out.violation = 0.0;
  return out;
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (s + s.transpose()));
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd sym_inv_sqrt(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (s + s.transpose()));
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw std::invalid_argument("sym_inv_sqrt: matrix is not positive definite");
  }
  Eigen::VectorXd ev = es.eigenvalues().cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

GaussianCoupling gaussian_eot_coupling(const Eigen::VectorXd& m0, const Eigen::MatrixXd& S0,
                                       const Eigen::VectorXd& m1, const Eigen::MatrixXd& S1,
                                       double sigma2) {
  const Eigen::Index d = m0.size();
  if (m1.size() != d || S0.rows() != d || S0.cols() != d || S1.rows() != d || S1.cols() != d) {
    throw std::invalid_argument("gaussian_eot_coupling: dimension mismatch");
  }
  if (!(sigma2 >= 0.0)) throw std::invalid_argument("gaussian_eot_coupling: sigma2 must be >= 0");
  auto is_pd = [](const Eigen::MatrixXd& s) {
    if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + s.cwiseAbs().maxCoeff())) return false;
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    return llt.info() == Eigen::Success;
  };
  if (!is_pd(S0) || !is_pd(S1)) {
    throw std::invalid_argument("gaussian_eot_coupling: covariances must be symmetric positive definite");
  }
  const Eigen::MatrixXd r0 = sym_sqrt(S0);
  const Eigen::MatrixXd r0_inv = sym_inv_sqrt(S0);
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd inner = 4.0 * r0 * S1 * r0 + sigma2 * sigma2 * id;
  const Eigen::MatrixXd cross = 0.5 * r0 * (sym_sqrt(inner) - sigma2 * id) * r0_inv;

  GaussianCoupling gc;
  gc.mean.resize(2 * d);
  gc.mean << m0, m1;
  gc.cov.resize(2 * d, 2 * d);
  gc.cov.topLeftCorner(d, d) = S0;
  gc.cov.bottomRightCorner(d, d) = S1;
  gc.cov.topRightCorner(d, d) = cross;
  gc.cov.bottomLeftCorner(d, d) = cross.transpose();
  return gc;
}

}  // namespace sfeuot
