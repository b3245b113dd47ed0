#include "sfeuot/data.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sfeuot {

void DatasetSpec::validate() const {
  if (dim == 0) throw std::invalid_argument("dataset: dim must be positive");
  switch (kind) {
    case Kind::StdGaussian:
      break;
    case Kind::EightGaussian:
      if (dim != 2) throw std::invalid_argument("dataset: eight-gaussian requires dim 2");
      if (!(component_std >= 0.0)) throw std::invalid_argument("dataset: component_std must be >= 0");
      if (!mode_weights.empty()) {
        if (mode_weights.size() != 8) throw std::invalid_argument("dataset: mode_weights needs 8 entries");
        double total = 0.0;
        for (double w : mode_weights) {
          if (!(w >= 0.0)) throw std::invalid_argument("dataset: mode weights must be >= 0");
          total += w;
        }
        if (!(total > 0.0)) throw std::invalid_argument("dataset: mode weights sum to zero");
      }
      break;
    case Kind::Moon:
    case Kind::Spiral:
      if (dim != 2) throw std::invalid_argument("dataset: moon/spiral require dim 2");
      break;
    case Kind::GaussianPair: {
      if (mean.size() != static_cast<Eigen::Index>(dim) || cov.rows() != mean.size() ||
          cov.cols() != mean.size()) {
        throw std::invalid_argument("dataset: gaussian mean/cov shape mismatch");
      }
      Eigen::LLT<Eigen::MatrixXd> llt(cov);
      if (llt.info() != Eigen::Success) throw std::invalid_argument("dataset: covariance is not PD");
      break;
    }
  }
}

Matrix eight_gaussian_modes() {
  Matrix m(8, 2);
  for (int i = 0; i < 8; ++i) {
    const double a = i * std::numbers::pi / 4.0;
    m(i, 0) = kEightGaussianRadius * std::cos(a);
    m(i, 1) = kEightGaussianRadius * std::sin(a);
  }
  // cos(pi/2) etc. are not exact in floating point; snap the axis modes.
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      if (std::abs(m(i, j)) < 1e-12) m(i, j) = 0.0;
    }
  }
  return m;
}

namespace {

std::size_t pick_mode(const std::vector<double>& weights, Rng& rng) {
  if (weights.empty()) return uniform_index(rng, 8);
  double total = 0.0;
  for (double w : weights) total += w;
  double u = uniform01(rng) * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return 0;
}

}  // namespace

Matrix sample(const DatasetSpec& spec, std::size_t n, Rng& rng) {
  spec.validate();
  if (n == 0) throw std::invalid_argument("sample: n must be >= 1");
  Matrix out(n, spec.dim);
  switch (spec.kind) {
    case DatasetSpec::Kind::StdGaussian:
      fill_normal(rng, out.storage());
      break;
    case DatasetSpec::Kind::EightGaussian: {
      const Matrix modes = eight_gaussian_modes();
      for (std::size_t r = 0; r < n; ++r) {
        const std::size_t k = pick_mode(spec.mode_weights, rng);
        for (std::size_t j = 0; j < 2; ++j) {
          out(r, j) = modes(k, j) + spec.component_std * standard_normal(rng);
        }
      }
      break;
    }
    case DatasetSpec::Kind::Moon:
      for (std::size_t r = 0; r < n; ++r) {
        const double theta = std::numbers::pi * uniform01(rng);
        double x, y;
        if (uniform01(rng) < 0.5) {
          x = std::cos(theta);
          y = std::sin(theta);
        } else {
          x = 1.0 - std::cos(theta);
          y = 0.5 - std::sin(theta);
        }
        x += 0.05 * standard_normal(rng) - 0.5;
        y += 0.05 * standard_normal(rng) - 0.25;
        out(r, 0) = kMoonScale * x;
        out(r, 1) = kMoonScale * y;
      }
      break;
    case DatasetSpec::Kind::Spiral:
      for (std::size_t r = 0; r < n; ++r) {
        const double theta = std::numbers::pi * (1.0 + 3.0 * uniform01(rng));
        const double rad = 0.4 * theta;
        out(r, 0) = kSpiralScale * (rad * std::cos(theta) + 0.1 * standard_normal(rng));
        out(r, 1) = kSpiralScale * (rad * std::sin(theta) + 0.1 * standard_normal(rng));
      }
      break;
    case DatasetSpec::Kind::GaussianPair: {
      const Eigen::MatrixXd l = Eigen::LLT<Eigen::MatrixXd>(spec.cov).matrixL();
      Eigen::VectorXd z(static_cast<Eigen::Index>(spec.dim));
      for (std::size_t r = 0; r < n; ++r) {
        for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = standard_normal(rng);
        const Eigen::VectorXd x = spec.mean + l * z;
        for (Eigen::Index j = 0; j < z.size(); ++j) out(r, static_cast<std::size_t>(j)) = x(j);
      }
      break;
    }
  }
  return out;
}

Matrix sample(const DatasetSpec& spec, std::size_t n) {
  Rng rng(spec.seed);
  return sample(spec, n, rng);
}

GaussianPairProblem gaussian_pair(std::size_t dim, std::uint64_t seed, double sigma2) {
  if (dim == 0) throw std::invalid_argument("gaussian_pair: dim must be >= 1");
  Rng rng(seed);
  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::VectorXd m1(d);
  for (Eigen::Index i = 0; i < d; ++i) m1(i) = uniform(rng, -1.0, 1.0);
  Eigen::MatrixXd a(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) a(i, j) = standard_normal(rng);
  }
  Eigen::MatrixXd s1 = a * a.transpose() / static_cast<double>(dim) + 0.5 * Eigen::MatrixXd::Identity(d, d);
  s1 = 0.5 * (s1 + s1.transpose());

  GaussianPairProblem p;
  p.source.kind = DatasetSpec::Kind::StdGaussian;
  p.source.dim = dim;
  p.source.seed = seed + 1;
  p.target.kind = DatasetSpec::Kind::GaussianPair;
  p.target.dim = dim;
  p.target.seed = seed + 2;
  p.target.mean = m1;
  p.target.cov = s1;
  p.truth = gaussian_eot_coupling(Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Identity(d, d), m1, s1,
                                  sigma2);
  return p;
}

std::pair<Matrix, Matrix> sample_coupling(const GaussianCoupling& gc, std::size_t n, Rng& rng) {
  const Eigen::Index d = gc.dim();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gc.cov);
  const Eigen::MatrixXd root =
      es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  Matrix x(n, static_cast<std::size_t>(d)), y(n, static_cast<std::size_t>(d));
  Eigen::VectorXd z(2 * d);
  for (std::size_t r = 0; r < n; ++r) {
    for (Eigen::Index j = 0; j < 2 * d; ++j) z(j) = standard_normal(rng);
    const Eigen::VectorXd v = gc.mean + root * z;
    for (Eigen::Index j = 0; j < d; ++j) {
      x(r, static_cast<std::size_t>(j)) = v(j);
      y(r, static_cast<std::size_t>(j)) = v(d + j);
    }
  }
  return {std::move(x), std::move(y)};
}

}  // namespace sfeuot
