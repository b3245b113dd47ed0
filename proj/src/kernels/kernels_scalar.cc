#include <cmath>

#include "sfeuot/kernels.hpp"

namespace sfeuot::kernels {
namespace {

void gemm_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                 const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * ldc;
    if (!accumulate) {
      for (std::size_t j = 0; j < n; ++j) ci[j] = 0.0;
    }
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * lda + p];
      if (aip == 0.0) continue;
      const double* bp = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

double dot_scalar(std::size_t n, const double* x, const double* y) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_scalar(std::size_t n, double alpha, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double pairwise_distance_sum_scalar(std::size_t na, const double* a, std::size_t nb,
                                    const double* b, std::size_t dim) {
  double total = 0.0;
  for (std::size_t i = 0; i < na; ++i) {
    const double* ai = a + i * dim;
    double row = 0.0;
    for (std::size_t j = 0; j < nb; ++j) {
      const double* bj = b + j * dim;
      double s = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff = ai[d] - bj[d];
        s += diff * diff;
      }
      row += std::sqrt(s);
    }
    total += row;
  }
  return total;
}

void silu_jet_scalar(std::size_t n, const double* u, double* value, double* d1, double* d2,
                     double* d3) {
  for (std::size_t i = 0; i < n; ++i) {
    const double x = u[i];
    double s;
    if (x >= 0.0) {
      s = 1.0 / (1.0 + std::exp(-x));
    } else {
      const double e = std::exp(x);
      s = e / (1.0 + e);
    }
    const double q = s * (1.0 - s);
    value[i] = x * s;
    d1[i] = s * (1.0 + x * (1.0 - s));
    d2[i] = q * (2.0 + x * (1.0 - 2.0 * s));
    d3[i] = q * (3.0 - 6.0 * s + x * (1.0 - 6.0 * s + 6.0 * s * s));
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{"scalar", gemm_scalar, dot_scalar, axpy_scalar,
                                 pairwise_distance_sum_scalar, silu_jet_scalar};
  return table;
}

}  // namespace sfeuot::kernels
