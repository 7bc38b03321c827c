#include <cmath>

#include "bridge/simd/kernels.hpp"
#include "kernels_internal.hpp"

namespace bridge::simd {
namespace scalar {

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, float alpha,
          const float* a, std::size_t lda, const float* b, std::size_t ldb, float beta, float* c,
          std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    float* crow = c + i * ldc;
    if (beta == 0.0f) {
      for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0f;
    } else if (beta != 1.0f) {
      for (std::size_t j = 0; j < n; ++j) crow[j] *= beta;
    }
    for (std::size_t p = 0; p < k; ++p) {
      const float av = alpha * (ta == Trans::Yes ? a[p * lda + i] : a[i * lda + p]);
      if (tb == Trans::No) {
        const float* brow = b + p * ldb;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * b[j * ldb + p];
      }
    }
  }
}

void sincospi(const float* x, float* s, float* c, std::size_t n) {
  constexpr double kPi = 3.14159265358979323846;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = x[i];
    const double r = v - 2.0 * std::nearbyint(0.5 * v);  // r in [-1, 1]
    s[i] = static_cast<float>(std::sin(kPi * r));
    c[i] = static_cast<float>(std::cos(kPi * r));
  }
}

void tanh(const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

void adam(float* param, const float* grad, float* m, float* v, std::size_t n,
          const AdamCoeffs& k) {
  const float step = k.lr / k.bias1;
  const float inv_bias2 = 1.0f / k.bias2;
  for (std::size_t i = 0; i < n; ++i) {
    const float g = grad[i];
    m[i] = k.beta1 * m[i] + (1.0f - k.beta1) * g;
    v[i] = k.beta2 * v[i] + (1.0f - k.beta2) * g * g;
    param[i] -= step * m[i] / (std::sqrt(v[i] * inv_bias2) + k.eps);
  }
}

}  // namespace scalar

const KernelTable& scalar_kernels() {
  static const KernelTable table{"scalar", scalar::gemm, scalar::sincospi, scalar::tanh,
                                 scalar::adam};
  return table;
}

}  // namespace bridge::simd
