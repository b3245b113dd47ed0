#include <array>
#include <cmath>

#include <gtest/gtest.h>

#include "moments.hpp"
#include "sfeuot/bridge.hpp"

using namespace sfeuot;

TEST(TimeGrid, Points) {
  TimeGrid g(20);
  const auto p = g.points();
  ASSERT_EQ(p.size(), 20u);
  EXPECT_EQ(p.front(), 0.0);
  EXPECT_DOUBLE_EQ(p.back(), 1.0 - g.dt());
  for (double t : p) {
    EXPECT_GE(t, 0.0);
    EXPECT_LT(t, 1.0);
  }
  EXPECT_THROW(TimeGrid(0), std::invalid_argument);
}

TEST(TimeDistribution, LinearMassesN4) {
  TimeDistribution d(TimeDistribution::Kind::Linear, TimeGrid(4));
  const std::array<double, 4> want{0.1, 0.2, 0.3, 0.4};
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(d.mass(k), want[k], 1e-15);
}

TEST(TimeDistribution, UniformMassesN4) {
  TimeDistribution d(TimeDistribution::Kind::Uniform, TimeGrid(4));
  for (int k = 0; k < 4; ++k) EXPECT_EQ(d.mass(k), 0.25);
}

TEST(TimeDistribution, MassesSumToOne) {
  for (int n : {1, 2, 7, 20, 1000}) {
    for (auto kind : {TimeDistribution::Kind::Uniform, TimeDistribution::Kind::Linear}) {
      TimeDistribution d(kind, TimeGrid(n));
      double s = 0.0;
      for (double m : d.masses()) s += m;
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(TimeDistribution, LinearEmpiricalFrequencies) {
  for (int n : {4, 20}) {
    TimeDistribution d(TimeDistribution::Kind::Linear, TimeGrid(n));
    Rng rng(11 + n);
    const int draws = 1000000;
    std::vector<int> counts(n, 0);
    for (int i = 0; i < draws; ++i) ++counts[d.sample_index(rng)];
    for (int k = 0; k < n; ++k) {
      const double p = d.mass(k);
      const double se = std::sqrt(p * (1 - p) / draws);
      EXPECT_NEAR(counts[k] / static_cast<double>(draws), p, 4 * se) << "N=" << n << " k=" << k;
    }
  }
}

TEST(TimeDistribution, Names) {
  EXPECT_EQ(parse_time_kind("uniform"), TimeDistribution::Kind::Uniform);
  EXPECT_EQ(parse_time_kind("linear"), TimeDistribution::Kind::Linear);
  EXPECT_THROW(parse_time_kind("cosine"), std::invalid_argument);
  EXPECT_EQ(time_kind_name(TimeDistribution::Kind::Linear), "linear");
}

TEST(Bridge, Endpoints) {
  const std::vector<double> x{1.5, -2.0}, y{0.25, 4.0}, eta{0.7, -1.3};
  EXPECT_EQ(bridge_sample(x, y, 0.0, 0.8, eta), x);
  EXPECT_EQ(bridge_sample(x, y, 1.0, 0.8, eta), y);
}

TEST(Bridge, Errors) {
  const std::vector<double> x{1.0, 2.0}, y{1.0}, eta{0.0, 0.0};
  EXPECT_THROW(bridge_sample(x, y, 0.5, 1.0, eta), std::invalid_argument);
  EXPECT_THROW(bridge_sample(x, x, 1.5, 1.0, eta), std::invalid_argument);
  EXPECT_THROW(bridge_sample(x, x, -0.1, 1.0, eta), std::invalid_argument);
  EXPECT_THROW(conditional_step(x, x, 1.0, 0.05, 1.0, eta), std::invalid_argument);
  EXPECT_THROW(conditional_step(x, x, 0.96, 0.05, 1.0, eta), std::invalid_argument);
  EXPECT_THROW(conditional_step(x, y, 0.5, 0.05, 1.0, eta), std::invalid_argument);
}

TEST(Bridge, MidpointVarianceMonteCarlo) {
  Rng rng(5);
  const std::vector<double> z{0.0};
  Moments m;
  std::vector<double> eta(1);
  for (int i = 0; i < 100000; ++i) {
    eta[0] = standard_normal(rng);
    m.add(bridge_sample(z, z, 0.5, 0.8, eta)[0]);
  }
  EXPECT_NEAR(m.var(), 0.16, 3 * m.var_se());
}

TEST(ConditionalStep, LastStepHitsTarget) {
  const std::vector<double> xt{3.0, -1.0}, y{0.5, 0.25}, eta{10.0, -10.0};
  EXPECT_EQ(conditional_step_noise(0.95, 0.05, 1.0), 0.0);
  const auto out = conditional_step(xt, y, 0.95, 0.05, 1.0, eta);
  EXPECT_NEAR(out[0], y[0], 1e-15);
  EXPECT_NEAR(out[1], y[1], 1e-15);
}

TEST(ConditionalStep, NoiselessMean) {
  const std::vector<double> x{1.0, 0.0}, y{0.0, 1.0}, eta{0.0, 0.0};
  const auto out = conditional_step(x, y, 0.0, 0.05, 2.3, eta);
  EXPECT_NEAR(out[0], 0.95, 1e-15);
  EXPECT_NEAR(out[1], 0.05, 1e-15);
}

TEST(ConditionalStep, ZeroSigmaIsLinearInterpolation) {
  const std::vector<double> x{2.0}, y{-1.0}, eta{3.0};
  const double t = 0.3, dt = 0.1;
  const auto out = conditional_step(x, y, t, dt, 0.0, eta);
  EXPECT_NEAR(out[0], x[0] + (y[0] - x[0]) * dt / (1 - t), 1e-15);
}

TEST(ConditionalStep, VarianceMonteCarlo) {
  Rng rng(6);
  const std::vector<double> z{0.0};
  std::vector<double> eta(1);
  Moments m;
  for (int i = 0; i < 100000; ++i) {
    eta[0] = standard_normal(rng);
    m.add(conditional_step(z, z, 0.25, 0.05, 1.0, eta)[0]);
  }
  EXPECT_NEAR(m.var(), 0.70 * 0.05 / 0.75, 3 * m.var_se());
}

class MarginalConsistency : public ::testing::TestWithParam<double> {};

TEST_P(MarginalConsistency, ChainMatchesDirectDraw) {
  const double t = GetParam(), dt = 0.05, sigma = 0.9;
  const std::vector<double> x{0.4, -1.1}, y{2.0, 0.3};
  Rng rng(static_cast<std::uint64_t>(t * 1000));
  std::array<Moments, 2> chain, direct;
  std::vector<double> e1(2), e2(2), e3(2);
  for (int i = 0; i < 100000; ++i) {
    fill_normal(rng, e1);
    fill_normal(rng, e2);
    fill_normal(rng, e3);
    const auto xt = bridge_sample(x, y, t, sigma, e1);
    const auto a = conditional_step(xt, y, t, dt, sigma, e2);
    const auto b = bridge_sample(x, y, t + dt, sigma, e3);
    for (int j = 0; j < 2; ++j) {
      chain[j].add(a[j]);
      direct[j].add(b[j]);
    }
  }
  for (int j = 0; j < 2; ++j) {
    const double mse = std::hypot(chain[j].mean_se(), direct[j].mean_se());
    const double vse = std::hypot(chain[j].var_se(), direct[j].var_se());
    EXPECT_NEAR(chain[j].mean, direct[j].mean, 4 * mse);
    EXPECT_NEAR(chain[j].var(), direct[j].var(), 4 * vse);
  }
}

INSTANTIATE_TEST_SUITE_P(Times, MarginalConsistency, ::testing::Values(0.25, 0.5, 0.9));
