#pragma once

// Data-parallel float kernels behind the dense layers, the phase losses and
// the optimizer. Each kernel has a scalar reference implementation and, where
// the build and the CPU allow it, a SIMD variant. The variant is selected once
// at first use; BRIDGE_SIMD=scalar|avx2 in the environment overrides the choice.

#include <cstddef>
#include <string_view>

namespace bridge::simd {

enum class Trans : bool { No = false, Yes = true };

struct AdamCoeffs {
  float lr;
  float beta1;
  float beta2;
  float eps;
  float bias1;  // 1 - beta1^t
  float bias2;  // 1 - beta2^t
};

struct KernelTable {
  std::string_view name;

  // c[m x n] = alpha * op(a) * op(b) + beta * c, all row-major.
  // op(a) is m x k, op(b) is k x n. beta == 0 overwrites c without reading it.
  void (*gemm)(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, float alpha,
               const float* a, std::size_t lda, const float* b, std::size_t ldb, float beta,
               float* c, std::size_t ldc);

  // sin(pi x), cos(pi x) elementwise; x is in half-turns.
  void (*sincospi)(const float* x, float* sin_out, float* cos_out, std::size_t n);

  void (*tanh)(const float* x, float* y, std::size_t n);

  // One bias-corrected Adam update in place.
  void (*adam)(float* param, const float* grad, float* m, float* v, std::size_t n,
               const AdamCoeffs& k);
};

const KernelTable& scalar_kernels();

// nullptr when the variant is not compiled in or the CPU lacks the features.
const KernelTable* avx2_kernels();

// The table used by the library.
const KernelTable& active_kernels();

// Forces a table (tests and benchmarks). Not thread-safe against concurrent kernel use.
void set_active_kernels(const KernelTable& table);

}  // namespace bridge::simd
