// AVX2 + FMA variants. This translation unit is compiled with -mavx2 -mfma and
// must only be entered after a CPUID check (see dispatch.cc).

#include <immintrin.h>

#include <cmath>
#include <vector>

#include "sfeuot/kernels.hpp"

namespace sfeuot::kernels {
namespace {

double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

// 4 x 8 register block of C.
inline void block_4x8(std::size_t k, const double* a, std::size_t lda, const double* b,
                      std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  __m256d c00, c01, c10, c11, c20, c21, c30, c31;
  if (accumulate) {
    c00 = _mm256_loadu_pd(c);
    c01 = _mm256_loadu_pd(c + 4);
    c10 = _mm256_loadu_pd(c + ldc);
    c11 = _mm256_loadu_pd(c + ldc + 4);
    c20 = _mm256_loadu_pd(c + 2 * ldc);
    c21 = _mm256_loadu_pd(c + 2 * ldc + 4);
    c30 = _mm256_loadu_pd(c + 3 * ldc);
    c31 = _mm256_loadu_pd(c + 3 * ldc + 4);
  } else {
    c00 = c01 = c10 = c11 = c20 = c21 = c30 = c31 = _mm256_setzero_pd();
  }
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d b0 = _mm256_loadu_pd(b + p * ldb);
    const __m256d b1 = _mm256_loadu_pd(b + p * ldb + 4);
    __m256d av = _mm256_broadcast_sd(a + p);
    c00 = _mm256_fmadd_pd(av, b0, c00);
    c01 = _mm256_fmadd_pd(av, b1, c01);
    av = _mm256_broadcast_sd(a + lda + p);
    c10 = _mm256_fmadd_pd(av, b0, c10);
    c11 = _mm256_fmadd_pd(av, b1, c11);
    av = _mm256_broadcast_sd(a + 2 * lda + p);
    c20 = _mm256_fmadd_pd(av, b0, c20);
    c21 = _mm256_fmadd_pd(av, b1, c21);
    av = _mm256_broadcast_sd(a + 3 * lda + p);
    c30 = _mm256_fmadd_pd(av, b0, c30);
    c31 = _mm256_fmadd_pd(av, b1, c31);
  }
  _mm256_storeu_pd(c, c00);
  _mm256_storeu_pd(c + 4, c01);
  _mm256_storeu_pd(c + ldc, c10);
  _mm256_storeu_pd(c + ldc + 4, c11);
  _mm256_storeu_pd(c + 2 * ldc, c20);
  _mm256_storeu_pd(c + 2 * ldc + 4, c21);
  _mm256_storeu_pd(c + 3 * ldc, c30);
  _mm256_storeu_pd(c + 3 * ldc + 4, c31);
}

// One row of C, 8 columns.
inline void block_1x8(std::size_t k, const double* a, const double* b, std::size_t ldb, double* c,
                      bool accumulate) {
  __m256d c0 = accumulate ? _mm256_loadu_pd(c) : _mm256_setzero_pd();
  __m256d c1 = accumulate ? _mm256_loadu_pd(c + 4) : _mm256_setzero_pd();
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d av = _mm256_broadcast_sd(a + p);
    c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + p * ldb), c0);
    c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + p * ldb + 4), c1);
  }
  _mm256_storeu_pd(c, c0);
  _mm256_storeu_pd(c + 4, c1);
}

void gemm_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
               const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  const std::size_t n8 = n - n % 8;
  const std::size_t m4 = m - m % 4;
  for (std::size_t j = 0; j < n8; j += 8) {
    std::size_t i = 0;
    for (; i < m4; i += 4) {
      block_4x8(k, a + i * lda, lda, b + j, ldb, c + i * ldc + j, ldc, accumulate);
    }
    for (; i < m; ++i) block_1x8(k, a + i * lda, b + j, ldb, c + i * ldc + j, accumulate);
  }
  if (n8 == n) return;
  // Column tail: narrow outputs (scalar heads, data-dimension layers).
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * ldc;
    const double* ai = a + i * lda;
    for (std::size_t j = n8; j < n; ++j) {
      double s = accumulate ? ci[j] : 0.0;
      for (std::size_t p = 0; p < k; ++p) s = std::fma(ai[p], b[p * ldb + j], s);
      ci[j] = s;
    }
  }
}

double dot_avx2(std::size_t n, const double* x, const double* y) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_avx2(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double pairwise_distance_sum_avx2(std::size_t na, const double* a, std::size_t nb,
                                  const double* b, std::size_t dim) {
  const std::size_t nb4 = nb - nb % 4;
  // Coordinate-major copy of b so four targets load in one vector.
  std::vector<double> bt(dim * nb4);
  for (std::size_t j = 0; j < nb4; ++j) {
    for (std::size_t d = 0; d < dim; ++d) bt[d * nb4 + j] = b[j * dim + d];
  }
  double total = 0.0;
  for (std::size_t i = 0; i < na; ++i) {
    const double* ai = a + i * dim;
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t j = 0; j < nb4; j += 4) {
      __m256d s = _mm256_setzero_pd();
      for (std::size_t d = 0; d < dim; ++d) {
        const __m256d diff =
            _mm256_sub_pd(_mm256_broadcast_sd(ai + d), _mm256_loadu_pd(bt.data() + d * nb4 + j));
        s = _mm256_fmadd_pd(diff, diff, s);
      }
      acc = _mm256_add_pd(acc, _mm256_sqrt_pd(s));
    }
    double row = hsum(acc);
    for (std::size_t j = nb4; j < nb; ++j) {
      double s = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff = ai[d] - b[j * dim + d];
        s += diff * diff;
      }
      row += std::sqrt(s);
    }
    total += row;
  }
  return total;
}

// exp(x) for x in [-708, 0]: x = n ln2 + r, |r| <= ln2 / 2, degree-13 Taylor
// polynomial for e^r, 2^n assembled in the exponent bits.
inline __m256d exp_nonpositive(__m256d x) {
  x = _mm256_max_pd(x, _mm256_set1_pd(-708.0));
  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(6.93147180369123816490e-01), x);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.90821492927058770002e-10), r);
  static constexpr double kInvFact[14] = {
      1.0, 1.0, 1.0 / 2, 1.0 / 6, 1.0 / 24, 1.0 / 120, 1.0 / 720, 1.0 / 5040, 1.0 / 40320,
      1.0 / 362880, 1.0 / 3628800, 1.0 / 39916800, 1.0 / 479001600, 1.0 / 6227020800};
  __m256d p = _mm256_set1_pd(kInvFact[13]);
  for (int i = 12; i >= 0; --i) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kInvFact[i]));
  const __m128i ni = _mm256_cvtpd_epi32(n);
  const __m256i bits = _mm256_slli_epi64(_mm256_add_epi64(_mm256_cvtepi32_epi64(ni), _mm256_set1_epi64x(1023)), 52);
  return _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
}

void silu_jet_avx2(std::size_t n, const double* u, double* value, double* d1, double* d2,
                   double* d3) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d two = _mm256_set1_pd(2.0);
  const __m256d three = _mm256_set1_pd(3.0);
  const __m256d six = _mm256_set1_pd(6.0);
  const __m256d sign = _mm256_set1_pd(-0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_loadu_pd(u + i);
    // e = exp(-|x|); sigmoid is 1/(1+e) for x >= 0 and e/(1+e) otherwise.
    const __m256d e = exp_nonpositive(_mm256_or_pd(x, sign));
    const __m256d inv = _mm256_div_pd(one, _mm256_add_pd(one, e));
    const __m256d neg = _mm256_cmp_pd(x, _mm256_setzero_pd(), _CMP_LT_OQ);
    const __m256d s = _mm256_blendv_pd(inv, _mm256_mul_pd(e, inv), neg);
    const __m256d oms = _mm256_sub_pd(one, s);
    const __m256d q = _mm256_mul_pd(s, oms);
    _mm256_storeu_pd(value + i, _mm256_mul_pd(x, s));
    _mm256_storeu_pd(d1 + i, _mm256_mul_pd(s, _mm256_fmadd_pd(x, oms, one)));
    _mm256_storeu_pd(d2 + i, _mm256_mul_pd(q, _mm256_fmadd_pd(x, _mm256_fnmadd_pd(two, s, one), two)));
    // 1 - 6s + 6s^2 = 1 - 6 q
    const __m256d inner = _mm256_fnmadd_pd(six, q, one);
    _mm256_storeu_pd(d3 + i, _mm256_mul_pd(q, _mm256_fmadd_pd(x, inner, _mm256_fnmadd_pd(six, s, three))));
  }
  if (i < n) scalar_table().silu_jet(n - i, u + i, value + i, d1 + i, d2 + i, d3 + i);
}

}  // namespace

const KernelTable& avx2_table_unchecked() {
  static const KernelTable table{"avx2", gemm_avx2, dot_avx2, axpy_avx2,
                                 pairwise_distance_sum_avx2, silu_jet_avx2};
  return table;
}

}  // namespace sfeuot::kernels
