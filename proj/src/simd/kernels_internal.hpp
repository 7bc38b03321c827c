#pragma once

#include "bridge/simd/kernels.hpp"

namespace bridge::simd {

namespace scalar {
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, float alpha,
          const float* a, std::size_t lda, const float* b, std::size_t ldb, float beta, float* c,
          std::size_t ldc);
void sincospi(const float* x, float* s, float* c, std::size_t n);
void tanh(const float* x, float* y, std::size_t n);
void adam(float* param, const float* grad, float* m, float* v, std::size_t n,
          const AdamCoeffs& k);
}  // namespace scalar

#if defined(BRIDGE_HAVE_AVX2)
namespace avx2 {
const KernelTable& table();
}
#endif

}  // namespace bridge::simd
