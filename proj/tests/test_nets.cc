#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "sfeuot/kernels.hpp"
#include "sfeuot/nets.hpp"

using namespace sfeuot;

namespace {

// Straight-line forward pass written independently of the library.
double reference_value(const NetworkParams& net, double t, const std::vector<double>& x) {
  std::vector<double> a{t};
  a.insert(a.end(), x.begin(), x.end());
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const std::size_t in = net.layer_dims()[l], out = net.layer_dims()[l + 1];
    auto w = net.weights(l);
    auto b = net.biases(l);
    std::vector<double> h(out);
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      for (std::size_t i = 0; i < in; ++i) s += w[o * in + i] * a[i];
      h[o] = (l + 1 < net.num_layers()) ? s / (1.0 + std::exp(-s)) : s;
    }
    a = h;
  }
  return a[0];
}

ValueNetwork random_value(std::size_t dim, std::size_t hidden, std::size_t layers, std::uint64_t seed) {
  Rng rng(seed);
  return ValueNetwork::create(dim, hidden, layers, rng);
}

double grad_norm_sq(const ValueNetwork& v, double t, const std::vector<double>& x) {
  double s = 0.0;
  for (double g : value_input_grad(v, t, x)) s += g * g;
  return s;
}

}  // namespace

TEST(NetworkParams, ShapesAndValidation) {
  NetworkParams p({3, 4, 2});
  EXPECT_EQ(p.num_layers(), 2u);
  EXPECT_EQ(p.num_params(), 3u * 4 + 4 + 4 * 2 + 2);
  EXPECT_EQ(p.weights(0).size(), 12u);
  EXPECT_EQ(p.biases(1).size(), 2u);
  EXPECT_NO_THROW(p.validate());
  p.flat()[5] = std::nan("");
  EXPECT_THROW(p.validate(), NumericError);
  EXPECT_THROW(NetworkParams({3}), std::invalid_argument);
  EXPECT_THROW(NetworkParams({3, 0, 1}), std::invalid_argument);
}

TEST(NetworkParams, GlorotInitialisation) {
  Rng rng(1);
  auto p = NetworkParams::glorot({4, 16, 3}, rng, 0.01);
  const double bound0 = std::sqrt(6.0 / (4 + 16));
  for (double w : p.weights(0)) EXPECT_LE(std::abs(w), bound0);
  for (double b : p.biases(0)) EXPECT_EQ(b, 0.0);
  const double bound1 = 0.01 * std::sqrt(6.0 / (16 + 3));
  for (double w : p.weights(1)) EXPECT_LE(std::abs(w), bound1);
}

TEST(Silu, DerivativeFormula) {
  for (double u : {-3.0, -0.5, 0.0, 0.5, 3.0}) {
    const double s = 1.0 / (1.0 + std::exp(-u));
    EXPECT_NEAR(silu_derivs(u).d1, s * (1 + u * (1 - s)), 1e-15);
  }
}

TEST(Generator, ZeroNetIsIdentity) {
  Generator g{NetworkParams({4, 8, 8, 2})};
  const std::vector<double> x{0.3, -1.7}, z{2.0, 5.0};
  EXPECT_EQ(generator_forward(g, x, z), x);
}

TEST(Generator, HandComputedOneDimensional) {
  // t(x, z) = 0.5 silu(x): hidden weight (1, 0), output weight 0.5.
  Generator g{NetworkParams({2, 1, 1})};
  g.net.weights(0)[0] = 1.0;
  g.net.weights(1)[0] = 0.5;
  const std::vector<double> x{1.0}, z{-4.0};
  EXPECT_NEAR(generator_forward(g, x, z)[0], 1.365529, 1e-6);
}

TEST(Generator, AuxiliaryNoiseMatters) {
  Rng rng(2);
  auto g = Generator::create(2, 16, 2, rng);
  const std::vector<double> x{0.5, 0.5};
  EXPECT_NE(generator_forward(g, x, std::vector<double>{0.0, 0.0}),
            generator_forward(g, x, std::vector<double>{1.0, -1.0}));
}

TEST(Generator, DimensionMismatch) {
  Rng rng(3);
  auto g = Generator::create(2, 4, 1, rng);
  EXPECT_THROW(generator_forward(g, std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}),
               std::invalid_argument);
}

TEST(Value, ZeroAndBiasOnly) {
  ValueNetwork v{NetworkParams({3, 5, 1})};
  EXPECT_EQ(value_forward(v, 0.3, std::vector<double>{1.0, 2.0}), 0.0);
  v.net.biases(1)[0] = -2.5;
  EXPECT_EQ(value_forward(v, 0.9, std::vector<double>{-7.0, 4.0}), -2.5);
  EXPECT_EQ(value_forward(v, 0.0, std::vector<double>{0.0, 0.0}), -2.5);
}

TEST(Value, MatchesReferenceForward) {
  auto v = random_value(3, 12, 3, 4);
  Rng rng(5);
  for (int i = 0; i < 10; ++i) {
    std::vector<double> x(3);
    fill_normal(rng, x);
    const double t = uniform01(rng);
    EXPECT_NEAR(value_forward(v, t, x), reference_value(v.net, t, x), 1e-13);
  }
}

TEST(Value, InputGradientZeroAndLinear) {
  ValueNetwork z{NetworkParams({3, 4, 1})};
  for (double g : value_input_grad(z, 0.5, std::vector<double>{1.0, 2.0})) EXPECT_EQ(g, 0.0);
  ValueNetwork lin{NetworkParams({3, 1})};
  lin.net.weights(0)[0] = 9.0;  // time weight, not part of the spatial gradient
  lin.net.weights(0)[1] = 1.5;
  lin.net.weights(0)[2] = -0.25;
  const auto g = value_input_grad(lin, 0.7, std::vector<double>{3.0, 4.0});
  EXPECT_EQ(g[0], 1.5);
  EXPECT_EQ(g[1], -0.25);
}

TEST(Value, InputGradientFiniteDifferences) {
  auto v = random_value(3, 10, 2, 6);
  Rng rng(7);
  for (int i = 0; i < 5; ++i) {
    std::vector<double> x(3);
    fill_normal(rng, x);
    const double t = uniform01(rng);
    const auto g = value_input_grad(v, t, x);
    const double h = 1e-5;
    for (std::size_t j = 0; j < 3; ++j) {
      auto xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      const double fd = (value_forward(v, t, xp) - value_forward(v, t, xm)) / (2 * h);
      EXPECT_LE(std::abs(fd - g[j]), 1e-4 * std::max(std::abs(g[j]), 1e-3));
    }
  }
}

TEST(Hutchinson, IdentityHessianIsExact) {
  Rng rng(8);
  for (std::size_t d : {1, 2, 7}) {
    auto quad = [](std::span<const double> p) {
      double s = 0.0;
      for (double e : p) s += e * e;
      return s;
    };
    EXPECT_EQ(hutchinson_trace(quad, d, 3, rng), static_cast<double>(d));
  }
}

TEST(Hutchinson, DiagonalQuadratic) {
  Rng rng(9);
  auto quad = [](std::span<const double> p) { return 1.0 * p[0] * p[0] + 3.0 * p[1] * p[1]; };
  EXPECT_NEAR(hutchinson_trace(quad, 2, 10000, rng), 4.0, 1e-12);
}

TEST(Hutchinson, RandomQuadraticsUnbiased) {
  Rng rng(10);
  for (std::size_t d : {2, 5, 16}) {
    std::vector<double> a(d * d);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j <= i; ++j) a[i * d + j] = a[j * d + i] = standard_normal(rng);
    double trace = 0.0;
    for (std::size_t i = 0; i < d; ++i) trace += a[i * d + i];
    auto quad = [&](std::span<const double> p) {
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) s += p[i] * a[i * d + j] * p[j];
      return s;
    };
    // Single-probe variance estimated empirically, then the K-probe mean.
    const std::size_t k = 20000;
    std::vector<double> one(k);
    double mean = 0.0;
    for (auto& e : one) {
      e = hutchinson_trace(quad, d, 1, rng);
      mean += e;
    }
    mean /= k;
    double var = 0.0;
    for (double e : one) var += (e - mean) * (e - mean);
    var /= (k - 1);
    EXPECT_NEAR(mean, trace, 4 * std::sqrt(var / k) + 1e-12) << d;
  }
}

TEST(Hutchinson, ZeroProbesRejected) {
  Rng rng(11);
  auto quad = [](std::span<const double>) { return 0.0; };
  EXPECT_THROW(hutchinson_trace(quad, 2, 0, rng), std::invalid_argument);
  ValueNetwork v{NetworkParams({3, 1})};
  EXPECT_THROW(laplacian_hutchinson(v, 0.1, std::vector<double>{0.0, 0.0}, 0, rng), std::invalid_argument);
}

TEST(Hutchinson, LinearValueHasZeroLaplacian) {
  ValueNetwork lin{NetworkParams({3, 1})};
  lin.net.weights(0)[1] = 2.0;
  lin.net.weights(0)[2] = -1.0;
  Rng rng(12);
  EXPECT_EQ(laplacian_hutchinson(lin, 0.4, std::vector<double>{1.0, 1.0}, 5, rng), 0.0);
}

TEST(Hutchinson, NetworkLaplacianMatchesFiniteDifferenceTrace) {
  auto v = random_value(3, 10, 2, 13);
  Rng rng(14);
  const std::vector<double> x{0.2, -0.4, 0.9};
  const double t = 0.35, h = 1e-4;
  double trace = 0.0;
  for (std::size_t j = 0; j < 3; ++j) {
    auto xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    trace += (value_forward(v, t, xp) - 2 * value_forward(v, t, x) + value_forward(v, t, xm)) / (h * h);
  }
  // Many probes: the estimate's spread shrinks to the off-diagonal noise.
  const double est = laplacian_hutchinson(v, t, x, 20000, rng);
  EXPECT_NEAR(est, trace, 0.05 * std::max(1.0, std::abs(trace)));
}

TEST(Backprop, LinearValueWeightGradientIsInput) {
  ValueNetwork lin{NetworkParams({3, 1})};
  Matrix in(1, 3);
  in(0, 0) = 0.25;
  in(0, 1) = -1.0;
  in(0, 2) = 2.0;
  auto tape = JetTape::record(lin.net, in, JetLayout{});
  auto g = tape.backward(Matrix(1, 1, 1.0));
  EXPECT_EQ(g.params.weights(0)[0], 0.25);
  EXPECT_EQ(g.params.weights(0)[1], -1.0);
  EXPECT_EQ(g.params.weights(0)[2], 2.0);
  EXPECT_EQ(g.params.biases(0)[0], 1.0);
}

TEST(Backprop, ZeroAdjointGivesZeroGradients) {
  auto v = random_value(2, 6, 2, 15);
  Matrix in(2, 3, 0.5);
  auto tape = JetTape::record(v.net, in, JetLayout{});
  auto g = tape.backward(Matrix(2, 1, 0.0));
  for (double e : g.params.flat()) EXPECT_EQ(e, 0.0);
}

TEST(Backprop, TapeIsConsumedOnce) {
  auto v = random_value(2, 6, 1, 16);
  Matrix in(1, 3, 0.1);
  auto tape = JetTape::record(v.net, in, JetLayout{});
  tape.backward(Matrix(1, 1, 1.0));
  EXPECT_TRUE(tape.consumed());
  EXPECT_THROW(tape.backward(Matrix(1, 1, 1.0)), std::logic_error);
}

TEST(Backprop, GradientNormSquaredFiniteDifferences) {
  const std::size_t d = 2;
  auto v = random_value(d, 7, 1, 17);
  Rng rng(18);
  for (int point = 0; point < 3; ++point) {
    std::vector<double> x(d);
    fill_normal(rng, x);
    const double t = uniform01(rng);
    Matrix in(1, d + 1);
    in(0, 0) = t;
    std::copy(x.begin(), x.end(), in.data() + 1);
    JetLayout layout{d, 0, 1};
    auto tape = JetTape::record(v.net, in, layout);
    Matrix adj(layout.channels(), 1, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      adj(layout.tangent_channel(i), 0) = 2.0 * tape.output(0, layout.tangent_channel(i))[0];
    }
    auto g = tape.backward(adj, true, false);
    const double h = 1e-6;
    double worst = 0.0, scale = 1e-8;
    for (std::size_t k = 0; k < v.net.num_params(); ++k) {
      auto vp = v, vm = v;
      vp.net.flat()[k] += h;
      vm.net.flat()[k] -= h;
      const double fd = (grad_norm_sq(vp, t, x) - grad_norm_sq(vm, t, x)) / (2 * h);
      worst = std::max(worst, std::abs(fd - g.params.flat()[k]));
      scale = std::max(scale, std::abs(fd));
    }
    EXPECT_LE(worst / scale, 1e-3);
  }
}

TEST(Nets, DeterministicForwardAndGradients) {
  auto a = random_value(3, 16, 2, 19), b = random_value(3, 16, 2, 19);
  EXPECT_EQ(a.net, b.net);
  Matrix in(4, 4, 0.3);
  in(2, 1) = -1.0;
  auto ta = JetTape::record(a.net, in, JetLayout{3, 0, 1});
  auto tb = JetTape::record(b.net, in, JetLayout{3, 0, 1});
  Matrix adj(16, 1, 1.0);
  EXPECT_EQ(ta.backward(adj).params, tb.backward(adj).params);
}

TEST(Nets, ScalarAndAvx2TapesAgree) {
  const auto* avx = kernels::avx2_table();
  if (!avx) GTEST_SKIP() << "no AVX2 on this machine";
  const auto& before = kernels::active();
  auto v = random_value(3, 24, 3, 20);
  Rng rng(21);
  Matrix in(9, 4), probes(18, 3);
  for (double& e : in.storage()) e = standard_normal(rng);
  fill_rademacher(rng, probes.storage());
  JetLayout layout{3, 2, 1};
  Matrix adj(9 * layout.channels(), 1);
  for (double& e : adj.storage()) e = standard_normal(rng);
  kernels::set_active(kernels::scalar_table());
  auto ts = JetTape::record(v.net, in, layout, probes);
  std::vector<double> outs;
  for (std::size_t b = 0; b < 9; ++b)
    for (std::size_t c = 0; c < layout.channels(); ++c) outs.push_back(ts.output(b, c)[0]);
  auto gs = ts.backward(adj);
  kernels::set_active(*avx);
  auto tv = JetTape::record(v.net, in, layout, probes);
  std::size_t idx = 0;
  for (std::size_t b = 0; b < 9; ++b)
    for (std::size_t c = 0; c < layout.channels(); ++c, ++idx)
      EXPECT_NEAR(tv.output(b, c)[0], outs[idx], 1e-12 * std::max(1.0, std::abs(outs[idx])));
  auto gv = tv.backward(adj);
  for (std::size_t k = 0; k < gs.params.num_params(); ++k) {
    EXPECT_NEAR(gv.params.flat()[k], gs.params.flat()[k], 1e-11 * std::max(1.0, std::abs(gs.params.flat()[k])));
  }
  kernels::set_active(before);
}
