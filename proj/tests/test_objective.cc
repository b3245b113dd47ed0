#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "sfeuot/objective.hpp"

using namespace sfeuot;

namespace {

// v(t, x) = a t + b . x + c as a single linear layer.
ValueNetwork linear_value(double a, const std::vector<double>& b, double c) {
  ValueNetwork v{NetworkParams({b.size() + 1, 1})};
  v.net.weights(0)[0] = a;
  for (std::size_t i = 0; i < b.size(); ++i) v.net.weights(0)[i + 1] = b[i];
  v.net.biases(0)[0] = c;
  return v;
}

ResidualBatch single(double t, const std::vector<double>& xt, const std::vector<double>& xn, double dt,
                     std::size_t probes = 1) {
  ResidualBatch b;
  b.t = {t};
  b.x_t = Matrix(1, xt.size());
  b.x_next = Matrix(1, xn.size());
  std::copy(xt.begin(), xt.end(), b.x_t.data());
  std::copy(xn.begin(), xn.end(), b.x_next.data());
  b.dt = dt;
  b.n_probes = probes;
  b.probes = Matrix(probes, xt.size(), 1.0);
  return b;
}

Matrix row(const std::vector<double>& v) {
  Matrix m(1, v.size());
  std::copy(v.begin(), v.end(), m.data());
  return m;
}

LossWeights weights(double alpha, double sigma, double p = 2.0, double r1 = 0.0) {
  LossWeights w;
  w.alpha = alpha;
  w.sigma = sigma;
  w.p = p;
  w.r1_coeff = r1;
  return w;
}

BridgeDraw random_draw(std::size_t n, std::size_t d, std::size_t n_steps, Rng& rng) {
  BridgeDraw draw{Matrix(n, d), Matrix(n, d), Matrix(n, d), Matrix(n, d), std::vector<double>(n)};
  fill_normal(rng, draw.x.storage());
  fill_normal(rng, draw.y_hat.storage());
  fill_normal(rng, draw.eta1.storage());
  fill_normal(rng, draw.eta2.storage());
  for (std::size_t b = 0; b < n; ++b) draw.t[b] = static_cast<double>(b % n_steps) / n_steps;
  return draw;
}

}  // namespace

TEST(LossWeights, Validation) {
  EXPECT_NO_THROW(weights(1, 1).validate());
  EXPECT_THROW(weights(0, 1).validate(), std::invalid_argument);
  EXPECT_THROW(weights(1, -1).validate(), std::invalid_argument);
  EXPECT_THROW(weights(1, 1, 0.5).validate(), std::invalid_argument);
  EXPECT_THROW(weights(1, 1, 2.5).validate(), std::invalid_argument);
  EXPECT_THROW(weights(1, 1, 2, -0.1).validate(), std::invalid_argument);
}

TEST(Residual, ConstantValueIsZero) {
  auto v = linear_value(0, {0, 0}, 3.7);
  auto c = hjb_residual(v, single(0.3, {1, 2}, {-4, 5}, 0.05), weights(1.3, 0.9));
  EXPECT_EQ(c.residual[0], 0.0);
}

TEST(Residual, LinearInSpace) {
  // v = 1'x, x_next = x_t, alpha = 2: R = -d.
  for (std::size_t d : {1, 2, 5}) {
    auto v = linear_value(0, std::vector<double>(d, 1.0), 0.0);
    std::vector<double> x(d, 0.3);
    auto c = hjb_residual(v, single(0.5, x, x, 0.05), weights(2.0, 0.7));
    EXPECT_NEAR(c.residual[0], -static_cast<double>(d), 1e-12);
  }
}

TEST(Residual, PureTimeRamp) {
  auto v = linear_value(1.0, {0, 0}, 0.0);
  for (double alpha : {0.5, 3.0})
    for (double sigma : {0.1, 2.0}) {
      auto c = hjb_residual(v, single(0.25, {1, -1}, {7, 3}, 0.05), weights(alpha, sigma));
      EXPECT_NEAR(c.residual[0], 1.0, 1e-12);
    }
}

TEST(Residual, ConsistentWithStraightLineValue) {
  // v(t, x) = b (x - u t) is constant along the noiseless path with velocity u,
  // so R = -(alpha/2) b^2, which vanishes with alpha.
  const double b = 0.8, x = 0.3, y = 2.3, t = 0.2, dt = 0.05;
  const double u = (y - x) / (1.0 - t);
  auto v = linear_value(-b * u, {b}, 0.0);
  const double xt = (1 - t) * x + t * y;
  const double xn = xt + u * dt;
  for (double alpha : {1.0, 1e-3, 1e-6}) {
    auto c = hjb_residual(v, single(t, {xt}, {xn}, dt), weights(alpha, 1e-9));
    EXPECT_NEAR(c.residual[0], -0.5 * alpha * b * b, 1e-9);
  }
}

TEST(Residual, RejectsStepPastOne) {
  auto v = linear_value(0, {1}, 0);
  EXPECT_THROW(hjb_residual(v, single(0.97, {0}, {0}, 0.05), weights(1, 1)), std::invalid_argument);
}

TEST(Penalty, PowersAndSubgradient) {
  EXPECT_EQ(hjb_penalty(-3.0, 1.0), 3.0);
  EXPECT_EQ(hjb_penalty(-3.0, 2.0), 9.0);
  EXPECT_NEAR(hjb_penalty(4.0, 1.5), 8.0, 1e-12);
  EXPECT_EQ(hjb_penalty_grad(0.0, 1.0), 0.0);
  EXPECT_EQ(hjb_penalty_grad(-2.0, 1.0), -1.0);
  EXPECT_EQ(hjb_penalty_grad(2.0, 1.0), 1.0);
  EXPECT_EQ(hjb_penalty_grad(-2.0, 2.0), -4.0);
  EXPECT_EQ(hjb_penalty_grad(0.0, 1.5), 0.0);
}

TEST(ValueLoss, ZeroValue) {
  auto v = linear_value(0, {0, 0}, 0);
  auto r = value_loss(v, single(0.1, {1, 1}, {2, 2}, 0.05), row({1, 2}), row({3, 4}), EntropySpec::indicator(),
                      weights(1, 1));
  EXPECT_EQ(r.loss, 0.0);
}

TEST(ValueLoss, ConstantCancelsUnderIndicator) {
  for (double c : {-5.0, 0.0, 2.5, 100.0}) {
    auto v = linear_value(0, {0}, c);
    auto r = value_loss(v, single(0.4, {1}, {2}, 0.05), row({0.5}), row({-3}), EntropySpec::indicator(),
                        weights(1, 1));
    EXPECT_EQ(r.loss, 0.0);
  }
}

TEST(ValueLoss, HandComputedLinear) {
  // v = a t + b x + c in 1D, single sample, KL conjugate with scale 5.
  const double a = 0.3, b = -0.7, c = 0.2, t = 0.35, dt = 0.05, xt = 0.4, xn = 0.9, yh = 1.1, yr = -0.6;
  const double alpha = 1.5, sigma = 0.8, p = 1.5, r1 = 0.25, lambda_d = 1.7;
  auto v = linear_value(a, {b}, c);
  auto w = weights(alpha, sigma, p, r1);
  w.lambda_d = lambda_d;
  const double rres = (a * dt + b * (xn - xt)) / dt - 0.5 * alpha * b * b;
  const double vyr = a + b * yr + c;
  const double want = lambda_d * std::pow(std::abs(rres), p) - 0.5 * alpha * b * b + r1 * b * b - (a + b * yh + c) +
                      (5.0 * std::exp(vyr / 5.0) - 5.0);
  auto r = value_loss(v, single(t, {xt}, {xn}, dt), row({yh}), row({yr}), EntropySpec::scaled_kl(5.0), w);
  EXPECT_NEAR(r.loss, want, 1e-6 * std::abs(want));
  EXPECT_NEAR(r.mean_abs_residual, std::abs(rres), 1e-12);
}

TEST(ValueLoss, ShiftInvariancePerPairedBatch) {
  Rng rng(1);
  auto v = ValueNetwork::create(2, 8, 2, rng);
  auto draw = random_draw(6, 2, 20, rng);
  auto batch = make_residual_batch(draw, 0.05, 0.8, draw_probes(6, 1, 2, rng), 1);
  Matrix yr(6, 2);
  fill_normal(rng, yr.storage());
  auto w = weights(1.0, 0.8, 1.0);
  const double l0 = value_loss(v, batch, draw.y_hat, yr, EntropySpec::indicator(), w).loss;
  auto shifted = v;
  shifted.net.biases(shifted.net.num_layers() - 1)[0] += 3.25;
  const double l1 = value_loss(shifted, batch, draw.y_hat, yr, EntropySpec::indicator(), w).loss;
  EXPECT_NEAR(l0, l1, 1e-12);
}

TEST(GeneratorLoss, ConstantValue) {
  auto v = linear_value(0, {0, 0}, 1.25);
  auto g = generator_loss(v, single(0.1, {1, 2}, {3, 4}, 0.05), weights(1, 1));
  EXPECT_EQ(g.loss, 0.0);
  for (double e : g.d_x_t.storage()) EXPECT_EQ(e, 0.0);
  for (double e : g.d_x_next.storage()) EXPECT_EQ(e, 0.0);
}

TEST(GeneratorLoss, TimeRamp) {
  auto v = linear_value(1.0, {0, 0}, 0);
  auto w = weights(1, 1);
  w.lambda_g = 0.1;
  auto g = generator_loss(v, single(0.1, {1, 2}, {3, 4}, 0.05), w);
  EXPECT_NEAR(g.loss, 0.1, 1e-12);
  for (double e : g.d_x_t.storage()) EXPECT_EQ(e, 0.0);
  for (double e : g.d_x_next.storage()) EXPECT_EQ(e, 0.0);
}

TEST(GeneratorLoss, GradientWrtYHatMatchesFiniteDifferences) {
  Rng rng(2);
  auto v = ValueNetwork::create(1, 8, 2, rng);
  auto w = weights(1.2, 0.9, 1.0);
  w.lambda_g = 0.3;
  for (double t : {0.0, 0.35, 0.95}) {
    auto draw = random_draw(1, 1, 20, rng);
    draw.t = {t};
    Matrix probes = draw_probes(1, 1, 1, rng);
    auto loss_at = [&](double yh) {
      auto d = draw;
      d.y_hat(0, 0) = yh;
      return generator_loss(v, make_residual_batch(d, 0.05, w.sigma, probes, 1), w).loss;
    };
    auto g = generator_loss(v, make_residual_batch(draw, 0.05, w.sigma, probes, 1), w);
    const double analytic = chain_to_y_hat(g, draw, 0.05)(0, 0);
    const double h = 1e-6, y0 = draw.y_hat(0, 0);
    const double fd = (loss_at(y0 + h) - loss_at(y0 - h)) / (2 * h);
    EXPECT_LE(std::abs(fd - analytic), 1e-3 * std::max(std::abs(fd), 1e-6)) << t;
  }
}

TEST(Losses, GradientIsolation) {
  Rng rng(3);
  auto v = ValueNetwork::create(2, 6, 1, rng);
  const auto before = v.net;
  auto draw = random_draw(4, 2, 10, rng);
  auto batch = make_residual_batch(draw, 0.1, 1.0, draw_probes(4, 2, 2, rng), 2);
  Matrix yr(4, 2, 0.5);
  auto vl = value_loss(v, batch, draw.y_hat, yr, EntropySpec::indicator(), weights(1, 1));
  EXPECT_EQ(vl.grad.layer_dims(), v.net.layer_dims());
  auto gl = generator_loss(v, batch, weights(1, 1));
  EXPECT_EQ(v.net, before);
  EXPECT_EQ(gl.d_x_t.rows(), 4u);
  EXPECT_EQ(gl.d_x_next.cols(), 2u);
}

TEST(Losses, ProbesShapeChecked) {
  auto v = linear_value(0, {1, 1}, 0);
  auto b = single(0.1, {1, 1}, {1, 1}, 0.05);
  b.probes = Matrix(3, 2, 1.0);
  EXPECT_THROW(hjb_residual(v, b, weights(1, 1)), std::invalid_argument);
}

TEST(Losses, DrawProbesAreRademacher) {
  Rng rng(4);
  auto p = draw_probes(5, 3, 4, rng);
  EXPECT_EQ(p.rows(), 15u);
  EXPECT_EQ(p.cols(), 4u);
  for (double e : p.storage()) EXPECT_TRUE(e == 1.0 || e == -1.0);
}
