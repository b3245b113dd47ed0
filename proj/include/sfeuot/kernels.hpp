#pragma once

// Dense arithmetic kernels used by the network and metric inner loops.
//
// Every kernel has a portable scalar reference and, on x86-64, an AVX2+FMA
// variant. The active table is chosen once at startup from CPUID; setting the
// environment variable SFEUOT_KERNELS=scalar forces the reference path.

#include <cstddef>
#include <string_view>

namespace sfeuot::kernels {

struct KernelTable {
  std::string_view name;

  // C(m x n) = A(m x k) * B(k x n), or C += A * B when accumulate is set.
  // All operands row-major with the given leading dimensions.
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
               const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate);

  double (*dot)(std::size_t n, const double* x, const double* y);

  // y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);

  // Sum over i < na, j < nb of the Euclidean distance between row i of a and
  // row j of b (both dim columns, contiguous).
  double (*pairwise_distance_sum)(std::size_t na, const double* a, std::size_t nb,
                                  const double* b, std::size_t dim);

  // SiLU u * sigmoid(u) and its first three derivatives, elementwise.
  void (*silu_jet)(std::size_t n, const double* u, double* value, double* d1, double* d2,
                   double* d3);
};

const KernelTable& scalar_table();

// Returns nullptr when the AVX2 translation unit is absent or the CPU lacks
// AVX2/FMA.
const KernelTable* avx2_table();

// Table selected at startup.
const KernelTable& active();

// Overrides the active table (tests and benchmarks).
void set_active(const KernelTable& table);

}  // namespace sfeuot::kernels
