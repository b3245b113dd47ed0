#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "sfeuot/kernels.hpp"
#include "sfeuot/random.hpp"

using namespace sfeuot;
namespace k = sfeuot::kernels;

namespace {

std::vector<double> randn(std::size_t n, Rng& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * standard_normal(rng);
  return v;
}

void expect_close(const std::vector<double>& a, const std::vector<double>& b, double rel) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_LE(std::abs(a[i] - b[i]), rel * std::max(1.0, std::abs(a[i]))) << i;
  }
}

const k::KernelTable* avx2_or_skip() { return k::avx2_table(); }

}  // namespace

TEST(Kernels, ScalarGemmMatchesNaive) {
  Rng rng(1);
  const std::size_t m = 5, n = 7, kk = 3;
  auto a = randn(m * kk, rng), b = randn(kk * n, rng);
  std::vector<double> c(m * n, 9.0);
  k::scalar_table().gemm(m, n, kk, a.data(), kk, b.data(), n, c.data(), n, false);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < kk; ++l) s += a[i * kk + l] * b[l * n + j];
      EXPECT_NEAR(c[i * n + j], s, 1e-14);
    }
  k::scalar_table().gemm(m, n, kk, a.data(), kk, b.data(), n, c.data(), n, true);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < kk; ++l) s += a[i * kk + l] * b[l * n + j];
      EXPECT_NEAR(c[i * n + j], 2 * s, 1e-13);
    }
}

TEST(Kernels, ScalarSiluJetMatchesClosedForm) {
  for (double u : {-40.0, -5.0, -0.3, 0.0, 0.7, 3.0, 40.0}) {
    double v, d1, d2, d3;
    k::scalar_table().silu_jet(1, &u, &v, &d1, &d2, &d3);
    const double s = 1.0 / (1.0 + std::exp(-u));
    EXPECT_NEAR(v, u * s, 1e-15 * std::max(1.0, std::abs(u)));
    EXPECT_NEAR(d1, s * (1 + u * (1 - s)), 1e-15);
    // Second derivative by central differences of the first.
    const double h = 1e-5;
    auto first = [](double x) {
      const double q = 1.0 / (1.0 + std::exp(-x));
      return q * (1 + x * (1 - q));
    };
    EXPECT_NEAR(d2, (first(u + h) - first(u - h)) / (2 * h), 1e-8);
    double v2, e1, e2, e3;
    double up = u + h, um = u - h;
    k::scalar_table().silu_jet(1, &up, &v2, &e1, &e2, &e3);
    const double d2p = e2;
    k::scalar_table().silu_jet(1, &um, &v2, &e1, &e2, &e3);
    EXPECT_NEAR(d3, (d2p - e2) / (2 * h), 1e-8);
  }
}

TEST(Kernels, ActiveTableIsSelected) {
  const auto& t = k::active();
  EXPECT_TRUE(t.name == "scalar" || t.name == "avx2");
}

TEST(Kernels, Avx2GemmMatchesScalar) {
  const auto* avx = avx2_or_skip();
  if (!avx) GTEST_SKIP() << "no AVX2 on this machine";
  Rng rng(2);
  for (auto [m, n, kk] : {std::tuple<std::size_t, std::size_t, std::size_t>{1, 1, 1},
                          {3, 5, 7}, {17, 33, 9}, {64, 64, 64}, {130, 3, 258}, {4, 257, 2}}) {
    auto a = randn(m * kk, rng), b = randn(kk * n, rng), c0 = randn(m * n, rng);
    for (bool acc : {false, true}) {
      auto cs = c0, cv = c0;
      k::scalar_table().gemm(m, n, kk, a.data(), kk, b.data(), n, cs.data(), n, acc);
      avx->gemm(m, n, kk, a.data(), kk, b.data(), n, cv.data(), n, acc);
      expect_close(cs, cv, 1e-12);
    }
  }
}

TEST(Kernels, Avx2StridedGemmMatchesScalar) {
  const auto* avx = avx2_or_skip();
  if (!avx) GTEST_SKIP() << "no AVX2 on this machine";
  Rng rng(3);
  const std::size_t m = 9, n = 11, kk = 6, lda = 10, ldb = 15, ldc = 13;
  auto a = randn(m * lda, rng), b = randn(kk * ldb, rng), c0 = randn(m * ldc, rng);
  auto cs = c0, cv = c0;
  k::scalar_table().gemm(m, n, kk, a.data(), lda, b.data(), ldb, cs.data(), ldc, true);
  avx->gemm(m, n, kk, a.data(), lda, b.data(), ldb, cv.data(), ldc, true);
  expect_close(cs, cv, 1e-12);
}

TEST(Kernels, Avx2DotAxpyMatchScalar) {
  const auto* avx = avx2_or_skip();
  if (!avx) GTEST_SKIP() << "no AVX2 on this machine";
  Rng rng(4);
  for (std::size_t n : {0, 1, 3, 4, 5, 16, 17, 1001}) {
    auto x = randn(n, rng), y = randn(n, rng);
    EXPECT_NEAR(k::scalar_table().dot(n, x.data(), y.data()), avx->dot(n, x.data(), y.data()),
                1e-12 * std::max<double>(1.0, n));
    auto ys = y, yv = y;
    k::scalar_table().axpy(n, -0.37, x.data(), ys.data());
    avx->axpy(n, -0.37, x.data(), yv.data());
    expect_close(ys, yv, 1e-15);
  }
}

TEST(Kernels, Avx2PairwiseDistanceMatchesScalar) {
  const auto* avx = avx2_or_skip();
  if (!avx) GTEST_SKIP() << "no AVX2 on this machine";
  Rng rng(5);
  for (std::size_t dim : {1, 2, 4, 5}) {
    const std::size_t na = 37, nb = 23;
    auto a = randn(na * dim, rng), b = randn(nb * dim, rng);
    const double s = k::scalar_table().pairwise_distance_sum(na, a.data(), nb, b.data(), dim);
    const double v = avx->pairwise_distance_sum(na, a.data(), nb, b.data(), dim);
    EXPECT_NEAR(s, v, 1e-12 * s);
  }
}

TEST(Kernels, Avx2SiluJetMatchesScalar) {
  const auto* avx = avx2_or_skip();
  if (!avx) GTEST_SKIP() << "no AVX2 on this machine";
  Rng rng(6);
  std::vector<double> u = randn(1003, rng, 6.0);
  for (double e : {0.0, -0.0, 1e-300, -1e-300, 30.0, -30.0, 700.0, -700.0, 745.0, -745.0, 1e6, -1e6}) u.push_back(e);
  const std::size_t n = u.size();
  std::vector<double> vs(n), d1s(n), d2s(n), d3s(n), vv(n), d1v(n), d2v(n), d3v(n);
  k::scalar_table().silu_jet(n, u.data(), vs.data(), d1s.data(), d2s.data(), d3s.data());
  avx->silu_jet(n, u.data(), vv.data(), d1v.data(), d2v.data(), d3v.data());
  expect_close(vs, vv, 1e-14);
  expect_close(d1s, d1v, 1e-14);
  expect_close(d2s, d2v, 1e-14);
  expect_close(d3s, d3v, 1e-13);
}

TEST(Kernels, SetActiveOverrides) {
  const auto& before = k::active();
  k::set_active(k::scalar_table());
  EXPECT_EQ(k::active().name, "scalar");
  k::set_active(before);
}
