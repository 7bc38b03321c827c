// AVX2 + FMA variants. This translation unit is the only one compiled with
// -mavx2 -mfma; nothing here runs unless the CPU reports both features.

#include <immintrin.h>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <memory>

#include "bridge/simd/kernels.hpp"
#include "kernels_internal.hpp"

namespace bridge::simd::avx2 {
namespace {

// ---- gemm ------------------------------------------------------------------
//
// Goto-style blocking: op(b) is packed into NR-wide column panels, op(a) into
// MR-tall row panels, and an MR x NR register tile accumulates with FMA.
// Packing absorbs both transposition flags so one micro-kernel serves all four.

constexpr std::size_t kMR = 6;
constexpr std::size_t kNR = 16;
constexpr std::size_t kKC = 256;
constexpr std::size_t kMC = 96;
constexpr std::size_t kNC = 1024;

struct AlignedFree {
  void operator()(float* p) const { std::free(p); }
};
using Buffer = std::unique_ptr<float[], AlignedFree>;

float* scratch(Buffer& buf, std::size_t& cap, std::size_t need) {
  if (need > cap) {
    const std::size_t bytes = ((need * sizeof(float) + 63) / 64) * 64;
    buf.reset(static_cast<float*>(std::aligned_alloc(64, bytes)));
    if (!buf) throw std::bad_alloc();
    cap = need;
  }
  return buf.get();
}

void pack_a(Trans ta, const float* a, std::size_t lda, std::size_t i0, std::size_t p0,
            std::size_t mc, std::size_t kc, float* out) {
  for (std::size_t ir = 0; ir < mc; ir += kMR) {
    const std::size_t mr = std::min(kMR, mc - ir);
    for (std::size_t p = 0; p < kc; ++p) {
      for (std::size_t r = 0; r < kMR; ++r) {
        float v = 0.0f;
        if (r < mr) {
          const std::size_t i = i0 + ir + r;
          const std::size_t pp = p0 + p;
          v = ta == Trans::Yes ? a[pp * lda + i] : a[i * lda + pp];
        }
        *out++ = v;
      }
    }
  }
}

void pack_b(Trans tb, const float* b, std::size_t ldb, std::size_t p0, std::size_t j0,
            std::size_t kc, std::size_t nc, float* out) {
  for (std::size_t jr = 0; jr < nc; jr += kNR) {
    const std::size_t nr = std::min(kNR, nc - jr);
    for (std::size_t p = 0; p < kc; ++p) {
      const std::size_t pp = p0 + p;
      if (tb == Trans::No && nr == kNR) {
        const float* src = b + pp * ldb + j0 + jr;
        _mm256_store_ps(out, _mm256_loadu_ps(src));
        _mm256_store_ps(out + 8, _mm256_loadu_ps(src + 8));
        out += kNR;
        continue;
      }
      for (std::size_t c = 0; c < kNR; ++c) {
        float v = 0.0f;
        if (c < nr) {
          const std::size_t j = j0 + jr + c;
          v = tb == Trans::Yes ? b[j * ldb + pp] : b[pp * ldb + j];
        }
        *out++ = v;
      }
    }
  }
}

void micro_kernel(std::size_t kc, const float* pa, const float* pb, float* c, std::size_t ldc,
                  float alpha, std::size_t mr, std::size_t nr) {
  __m256 c00 = _mm256_setzero_ps(), c01 = _mm256_setzero_ps();
  __m256 c10 = _mm256_setzero_ps(), c11 = _mm256_setzero_ps();
  __m256 c20 = _mm256_setzero_ps(), c21 = _mm256_setzero_ps();
  __m256 c30 = _mm256_setzero_ps(), c31 = _mm256_setzero_ps();
  __m256 c40 = _mm256_setzero_ps(), c41 = _mm256_setzero_ps();
  __m256 c50 = _mm256_setzero_ps(), c51 = _mm256_setzero_ps();

  for (std::size_t p = 0; p < kc; ++p) {
    const __m256 b0 = _mm256_load_ps(pb);
    const __m256 b1 = _mm256_load_ps(pb + 8);
    __m256 av = _mm256_broadcast_ss(pa + 0);
    c00 = _mm256_fmadd_ps(av, b0, c00);
    c01 = _mm256_fmadd_ps(av, b1, c01);
    av = _mm256_broadcast_ss(pa + 1);
    c10 = _mm256_fmadd_ps(av, b0, c10);
    c11 = _mm256_fmadd_ps(av, b1, c11);
    av = _mm256_broadcast_ss(pa + 2);
    c20 = _mm256_fmadd_ps(av, b0, c20);
    c21 = _mm256_fmadd_ps(av, b1, c21);
    av = _mm256_broadcast_ss(pa + 3);
    c30 = _mm256_fmadd_ps(av, b0, c30);
    c31 = _mm256_fmadd_ps(av, b1, c31);
    av = _mm256_broadcast_ss(pa + 4);
    c40 = _mm256_fmadd_ps(av, b0, c40);
    c41 = _mm256_fmadd_ps(av, b1, c41);
    av = _mm256_broadcast_ss(pa + 5);
    c50 = _mm256_fmadd_ps(av, b0, c50);
    c51 = _mm256_fmadd_ps(av, b1, c51);
    pa += kMR;
    pb += kNR;
  }

  const __m256 acc[kMR][2] = {{c00, c01}, {c10, c11}, {c20, c21},
                              {c30, c31}, {c40, c41}, {c50, c51}};
  const __m256 va = _mm256_set1_ps(alpha);
  if (mr == kMR && nr == kNR) {
    for (std::size_t r = 0; r < kMR; ++r) {
      float* crow = c + r * ldc;
      _mm256_storeu_ps(crow, _mm256_fmadd_ps(va, acc[r][0], _mm256_loadu_ps(crow)));
      _mm256_storeu_ps(crow + 8, _mm256_fmadd_ps(va, acc[r][1], _mm256_loadu_ps(crow + 8)));
    }
    return;
  }
  alignas(32) float tile[kMR][kNR];
  for (std::size_t r = 0; r < kMR; ++r) {
    _mm256_store_ps(tile[r], _mm256_mul_ps(va, acc[r][0]));
    _mm256_store_ps(tile[r] + 8, _mm256_mul_ps(va, acc[r][1]));
  }
  for (std::size_t r = 0; r < mr; ++r)
    for (std::size_t j = 0; j < nr; ++j) c[r * ldc + j] += tile[r][j];
}

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, float alpha,
          const float* a, std::size_t lda, const float* b, std::size_t ldb, float beta, float* c,
          std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    float* crow = c + i * ldc;
    if (beta == 0.0f) {
      std::fill(crow, crow + n, 0.0f);
    } else if (beta != 1.0f) {
      for (std::size_t j = 0; j < n; ++j) crow[j] *= beta;
    }
  }
  if (m == 0 || n == 0 || k == 0 || alpha == 0.0f) return;

  thread_local Buffer abuf, bbuf;
  thread_local std::size_t acap = 0, bcap = 0;
  const std::size_t nc_max = std::min(n, kNC);
  const std::size_t mc_max = std::min(m, kMC);
  float* pb = scratch(bbuf, bcap, kKC * ((nc_max + kNR - 1) / kNR) * kNR);
  float* pa = scratch(abuf, acap, kKC * ((mc_max + kMR - 1) / kMR) * kMR);

  for (std::size_t jc = 0; jc < n; jc += kNC) {
    const std::size_t nc = std::min(kNC, n - jc);
    for (std::size_t pc = 0; pc < k; pc += kKC) {
      const std::size_t kc = std::min(kKC, k - pc);
      pack_b(tb, b, ldb, pc, jc, kc, nc, pb);
      for (std::size_t ic = 0; ic < m; ic += kMC) {
        const std::size_t mc = std::min(kMC, m - ic);
        pack_a(ta, a, lda, ic, pc, mc, kc, pa);
        for (std::size_t jr = 0; jr < nc; jr += kNR) {
          const std::size_t nr = std::min(kNR, nc - jr);
          for (std::size_t ir = 0; ir < mc; ir += kMR) {
            const std::size_t mr = std::min(kMR, mc - ir);
            micro_kernel(kc, pa + ir * kc, pb + jr * kc, c + (ic + ir) * ldc + jc + jr, ldc,
                         alpha, mr, nr);
          }
        }
      }
    }
  }
}

// ---- elementwise transcendentals ---------------------------------------------

constexpr double kPi = 3.14159265358979323846;
constexpr double pow_pi(int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= kPi;
  return r;
}
constexpr double fact(int e) {
  double r = 1.0;
  for (int i = 2; i <= e; ++i) r *= i;
  return r;
}
template <int E>
constexpr float taylor() {
  return static_cast<float>(((E / 2) % 2 ? -1.0 : 1.0) * pow_pi(E) / fact(E));
}

// r in [-0.5, 0.5]: truncated Taylor series of sin(pi r), cos(pi r); error < 4e-8.
inline void sincospi_reduced(__m256 r, __m256& s, __m256& c) {
  const __m256 r2 = _mm256_mul_ps(r, r);
  __m256 ps = _mm256_set1_ps(taylor<11>());
  ps = _mm256_fmadd_ps(ps, r2, _mm256_set1_ps(taylor<9>()));
  ps = _mm256_fmadd_ps(ps, r2, _mm256_set1_ps(taylor<7>()));
  ps = _mm256_fmadd_ps(ps, r2, _mm256_set1_ps(taylor<5>()));
  ps = _mm256_fmadd_ps(ps, r2, _mm256_set1_ps(taylor<3>()));
  ps = _mm256_fmadd_ps(ps, r2, _mm256_set1_ps(taylor<1>()));
  s = _mm256_mul_ps(ps, r);

  __m256 pc = _mm256_set1_ps(taylor<12>());
  pc = _mm256_fmadd_ps(pc, r2, _mm256_set1_ps(taylor<10>()));
  pc = _mm256_fmadd_ps(pc, r2, _mm256_set1_ps(taylor<8>()));
  pc = _mm256_fmadd_ps(pc, r2, _mm256_set1_ps(taylor<6>()));
  pc = _mm256_fmadd_ps(pc, r2, _mm256_set1_ps(taylor<4>()));
  pc = _mm256_fmadd_ps(pc, r2, _mm256_set1_ps(taylor<2>()));
  c = _mm256_fmadd_ps(pc, r2, _mm256_set1_ps(1.0f));
}

void sincospi(const float* x, float* s, float* c, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    const __m256 q = _mm256_round_ps(v, _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    const __m256 r = _mm256_sub_ps(v, q);
    // odd q flips both signs: sin(pi (q + r)) = (-1)^q sin(pi r)
    const __m256i odd = _mm256_slli_epi32(_mm256_cvtps_epi32(q), 31);
    const __m256 flip = _mm256_castsi256_ps(odd);
    __m256 vs, vc;
    sincospi_reduced(r, vs, vc);
    _mm256_storeu_ps(s + i, _mm256_xor_ps(vs, flip));
    _mm256_storeu_ps(c + i, _mm256_xor_ps(vc, flip));
  }
  if (i < n) scalar::sincospi(x + i, s + i, c + i, n - i);
}

inline __m256 exp256(__m256 x) {
  x = _mm256_min_ps(x, _mm256_set1_ps(88.3762626647949f));
  x = _mm256_max_ps(x, _mm256_set1_ps(-88.3762626647949f));
  __m256 fx = _mm256_fmadd_ps(x, _mm256_set1_ps(1.44269504088896341f), _mm256_set1_ps(0.5f));
  fx = _mm256_floor_ps(fx);
  x = _mm256_fnmadd_ps(fx, _mm256_set1_ps(0.693359375f), x);
  x = _mm256_fnmadd_ps(fx, _mm256_set1_ps(-2.12194440e-4f), x);
  const __m256 z = _mm256_mul_ps(x, x);
  __m256 y = _mm256_set1_ps(1.9875691500e-4f);
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.3981999507e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(8.3334519073e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(4.1665795894e-2f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.6666665459e-1f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(5.0000001201e-1f));
  y = _mm256_fmadd_ps(y, z, _mm256_add_ps(x, _mm256_set1_ps(1.0f)));
  __m256i e = _mm256_add_epi32(_mm256_cvttps_epi32(fx), _mm256_set1_epi32(127));
  e = _mm256_slli_epi32(e, 23);
  return _mm256_mul_ps(y, _mm256_castsi256_ps(e));
}

void tanh(const float* x, float* y, std::size_t n) {
  const __m256 sign_mask = _mm256_set1_ps(-0.0f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    const __m256 sign = _mm256_and_ps(v, sign_mask);
    const __m256 ax = _mm256_min_ps(_mm256_andnot_ps(sign_mask, v), _mm256_set1_ps(9.0f));
    const __m256 e = exp256(_mm256_add_ps(ax, ax));
    // 1 - 2 / (e + 1)
    const __m256 t = _mm256_sub_ps(
        _mm256_set1_ps(1.0f),
        _mm256_div_ps(_mm256_set1_ps(2.0f), _mm256_add_ps(e, _mm256_set1_ps(1.0f))));
    _mm256_storeu_ps(y + i, _mm256_or_ps(t, sign));
  }
  if (i < n) scalar::tanh(x + i, y + i, n - i);
}

void adam(float* param, const float* grad, float* m, float* v, std::size_t n,
          const AdamCoeffs& k) {
  const __m256 b1 = _mm256_set1_ps(k.beta1);
  const __m256 b2 = _mm256_set1_ps(k.beta2);
  const __m256 omb1 = _mm256_set1_ps(1.0f - k.beta1);
  const __m256 omb2 = _mm256_set1_ps(1.0f - k.beta2);
  const __m256 step = _mm256_set1_ps(k.lr / k.bias1);
  const __m256 inv_bias2 = _mm256_set1_ps(1.0f / k.bias2);
  const __m256 eps = _mm256_set1_ps(k.eps);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 g = _mm256_loadu_ps(grad + i);
    const __m256 mi = _mm256_add_ps(_mm256_mul_ps(b1, _mm256_loadu_ps(m + i)), _mm256_mul_ps(omb1, g));
    const __m256 vi = _mm256_add_ps(_mm256_mul_ps(b2, _mm256_loadu_ps(v + i)),
                                    _mm256_mul_ps(omb2, _mm256_mul_ps(g, g)));
    _mm256_storeu_ps(m + i, mi);
    _mm256_storeu_ps(v + i, vi);
    const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(_mm256_mul_ps(vi, inv_bias2)), eps);
    const __m256 upd = _mm256_div_ps(_mm256_mul_ps(step, mi), denom);
    _mm256_storeu_ps(param + i, _mm256_sub_ps(_mm256_loadu_ps(param + i), upd));
  }
  if (i < n) scalar::adam(param + i, grad + i, m + i, v + i, n - i, k);
}

}  // namespace

const KernelTable& table() {
  static const KernelTable t{"avx2", gemm, sincospi, tanh, adam};
  return t;
}

}  // namespace bridge::simd::avx2
