#include "sfeuot/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "sfeuot/kernels.hpp"

namespace sfeuot {

namespace {

void require_pairs(const Matrix& x, const Matrix& y, const char* who) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw std::invalid_argument(std::string(who) + ": x and y shapes differ");
  }
  if (x.rows() == 0) throw std::invalid_argument(std::string(who) + ": no samples");
}

}  // namespace

MomentErrors relative_moment_errors(const Matrix& x, const Matrix& y, const GaussianCoupling& truth) {
  require_pairs(x, y, "relative_moment_errors");
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (n < 2) throw std::invalid_argument("relative_moment_errors: need at least 2 pairs");
  if (truth.dim() != static_cast<Eigen::Index>(d)) {
    throw std::invalid_argument("relative_moment_errors: truth dimension mismatch");
  }
  const auto di = static_cast<Eigen::Index>(d);
  Eigen::VectorXd mx = Eigen::VectorXd::Zero(di), my = Eigen::VectorXd::Zero(di);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      mx(j) += x(r, j);
      my(j) += y(r, j);
    }
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  Eigen::MatrixXd cxy = Eigen::MatrixXd::Zero(di, di);
  Eigen::VectorXd vy = Eigen::VectorXd::Zero(di);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < d; ++i) {
      const double dx = x(r, i) - mx(i);
      for (std::size_t j = 0; j < d; ++j) cxy(i, j) += dx * (y(r, j) - my(j));
      const double dy = y(r, i) - my(i);
      vy(i) += dy * dy;
    }
  }
  cxy /= static_cast<double>(n - 1);
  vy /= static_cast<double>(n - 1);

  const Eigen::VectorXd m1 = truth.target_mean();
  const Eigen::VectorXd v1 = truth.target_cov().diagonal();
  const Eigen::MatrixXd c = truth.cross_cov();
  if (m1.norm() == 0.0 || v1.norm() == 0.0 || c.norm() == 0.0) {
    throw std::invalid_argument("relative_moment_errors: degenerate reference (zero norm)");
  }
  MomentErrors e;
  e.mean = 100.0 * (my - m1).norm() / m1.norm();
  e.var = 100.0 * (vy - v1).norm() / v1.norm();
  e.cov = 100.0 * (cxy - c).norm() / c.norm();
  return e;
}

double transport_cost(const Matrix& x, const Matrix& y) {
  require_pairs(x, y, "transport_cost");
  double total = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const double d = x(r, j) - y(r, j);
      s += d * d;
    }
    total += 0.5 * s;
  }
  return total / static_cast<double>(x.rows());
}

namespace {

std::size_t nearest_mode(const Matrix& samples, std::size_t r, const Matrix& modes, double* dist2) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < modes.rows(); ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j < modes.cols(); ++j) {
      const double d = samples(r, j) - modes(k, j);
      s += d * d;
    }
    if (s < best_d) {
      best_d = s;
      best = k;
    }
  }
  if (dist2) *dist2 = best_d;
  return best;
}

void require_modes(const Matrix& samples, const Matrix& modes, const char* who) {
  if (modes.rows() == 0) throw std::invalid_argument(std::string(who) + ": no modes");
  if (samples.cols() != modes.cols()) {
    throw std::invalid_argument(std::string(who) + ": dimension mismatch");
  }
}

}  // namespace

double mode_coverage(const Matrix& samples, const Matrix& modes, double radius) {
  require_modes(samples, modes, "mode_coverage");
  std::vector<bool> hit(modes.rows(), false);
  const double r2 = radius * radius;
  for (std::size_t r = 0; r < samples.rows(); ++r) {
    for (std::size_t k = 0; k < modes.rows(); ++k) {
      if (hit[k]) continue;
      double s = 0.0;
      for (std::size_t j = 0; j < modes.cols(); ++j) {
        const double d = samples(r, j) - modes(k, j);
        s += d * d;
      }
      if (s <= r2) hit[k] = true;
    }
  }
  return static_cast<double>(std::count(hit.begin(), hit.end(), true)) /
         static_cast<double>(modes.rows());
}

std::vector<double> mode_frequencies(const Matrix& samples, const Matrix& modes) {
  require_modes(samples, modes, "mode_frequencies");
  std::vector<double> freq(modes.rows(), 0.0);
  if (samples.rows() == 0) return freq;
  for (std::size_t r = 0; r < samples.rows(); ++r) freq[nearest_mode(samples, r, modes, nullptr)] += 1.0;
  for (double& f : freq) f /= static_cast<double>(samples.rows());
  return freq;
}

Matrix join_columns(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows()) throw std::invalid_argument("join_columns: row counts differ");
  Matrix out(x.rows(), x.cols() + y.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    std::copy(x.row(r).begin(), x.row(r).end(), out.row(r).begin());
    std::copy(y.row(r).begin(), y.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(x.cols()));
  }
  return out;
}

namespace {

double dist_sum(const Matrix& a, const Matrix& b) {
  return kernels::active().pairwise_distance_sum(a.rows(), a.data(), b.rows(), b.data(), a.cols());
}

double energy_from_sums(double s_ab, double s_aa, double s_bb, double na, double nb) {
  return std::max(0.0, 2.0 * s_ab / (na * nb) - s_aa / (na * na) - s_bb / (nb * nb));
}

Matrix gather_rows(const Matrix& pool, const std::vector<std::size_t>& idx, std::size_t begin,
                   std::size_t end) {
  Matrix out(end - begin, pool.cols());
  for (std::size_t r = begin; r < end; ++r) {
    std::copy(pool.row(idx[r]).begin(), pool.row(idx[r]).end(), out.row(r - begin).begin());
  }
  return out;
}

}  // namespace

double energy_distance(const Matrix& a, const Matrix& b) {
  if (a.rows() == 0 || b.rows() == 0) throw std::invalid_argument("energy_distance: empty sample");
  if (a.cols() != b.cols()) throw std::invalid_argument("energy_distance: dimension mismatch");
  if (a == b) return 0.0;
  return energy_from_sums(dist_sum(a, b), dist_sum(a, a), dist_sum(b, b),
                          static_cast<double>(a.rows()), static_cast<double>(b.rows()));
}

double energy_distance_null(const Matrix& a, const Matrix& b, std::size_t n_perm, double quantile,
                            Rng& rng) {
  if (n_perm == 0) throw std::invalid_argument("energy_distance_null: n_perm must be >= 1");
  if (!(quantile >= 0.0 && quantile <= 1.0)) {
    throw std::invalid_argument("energy_distance_null: quantile must lie in [0, 1]");
  }
  if (a.rows() == 0 || b.rows() == 0) throw std::invalid_argument("energy_distance_null: empty sample");
  if (a.cols() != b.cols()) throw std::invalid_argument("energy_distance_null: dimension mismatch");
  const std::size_t na = a.rows(), nb = b.rows(), n = na + nb;
  Matrix pool(n, a.cols());
  std::copy(a.storage().begin(), a.storage().end(), pool.storage().begin());
  std::copy(b.storage().begin(), b.storage().end(),
            pool.storage().begin() + static_cast<std::ptrdiff_t>(a.storage().size()));
  // Every split shares the same all-pairs total, so the cross term follows
  // from the two within-group sums.
  const double total = dist_sum(pool, pool);

  std::vector<std::size_t> idx(n);
  std::vector<double> stats;
  stats.reserve(n_perm);
  for (std::size_t p = 0; p < n_perm; ++p) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = n - 1; i > 0; --i) std::swap(idx[i], idx[uniform_index(rng, i + 1)]);
    const Matrix pa = gather_rows(pool, idx, 0, na);
    const Matrix pb = gather_rows(pool, idx, na, n);
    const double s_aa = dist_sum(pa, pa);
    const double s_bb = dist_sum(pb, pb);
    const double s_ab = 0.5 * (total - s_aa - s_bb);
    stats.push_back(energy_from_sums(s_ab, s_aa, s_bb, static_cast<double>(na), static_cast<double>(nb)));
  }
  std::sort(stats.begin(), stats.end());
  const double pos = quantile * static_cast<double>(stats.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, stats.size() - 1);
  return stats[lo] + (pos - static_cast<double>(lo)) * (stats[hi] - stats[lo]);
}

std::pair<Matrix, Matrix> sample_discrete_coupling(const Matrix& plan, const Matrix& source,
                                                   const Matrix& target, std::size_t n, Rng& rng) {
  if (plan.rows() != source.rows() || plan.cols() != target.rows()) {
    throw std::invalid_argument("sample_discrete_coupling: plan shape does not match atoms");
  }
  const auto& w = plan.storage();
  std::vector<double> cdf(w.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!(w[i] >= 0.0)) throw std::invalid_argument("sample_discrete_coupling: negative plan entry");
    acc += w[i];
    cdf[i] = acc;
  }
  if (!(acc > 0.0)) throw std::invalid_argument("sample_discrete_coupling: empty plan");
  Matrix x(n, source.cols()), y(n, target.cols());
  for (std::size_t r = 0; r < n; ++r) {
    const double u = uniform01(rng) * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t cell = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), w.size() - 1);
    while (w[cell] == 0.0 && cell > 0) --cell;
    const std::size_t i = cell / plan.cols(), j = cell % plan.cols();
    std::copy(source.row(i).begin(), source.row(i).end(), x.row(r).begin());
    std::copy(target.row(j).begin(), target.row(j).end(), y.row(r).begin());
  }
  return {std::move(x), std::move(y)};
}

}  // namespace sfeuot
