#pragma once

// Residual blocks, phase/cosine dissimilarity losses with analytic gradients,
// backpropagation to parameters and inputs, and Adam. Templated on the scalar
// type: channels train in float, gradient checks run the same code in double.
// All batched operations treat one row as one sample.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bridge/error.hpp"
#include "bridge/rng.hpp"
#include "bridge/tensor.hpp"

namespace bridge {

// y = x + W2 tanh(W1 x + b1) + b2
template <class T>
struct ResidualBlock {
  Matrix<T> w1;  // hidden x dim
  std::vector<T> b1;
  Matrix<T> w2;  // dim x hidden
  std::vector<T> b2;
  // Bumped on every parameter update; caches remember the version they saw.
  std::uint64_t version = 0;

  std::size_t dim() const noexcept { return w1.cols(); }
  std::size_t hidden() const noexcept { return w1.rows(); }
};

template <class T>
struct BlockGrads {
  Matrix<T> w1;
  std::vector<T> b1;
  Matrix<T> w2;
  std::vector<T> b2;
};

template <class T>
struct BlockCache {
  Matrix<T> x;
  Matrix<T> h;  // tanh activations
  const ResidualBlock<T>* block = nullptr;
  std::uint64_t version = 0;
};

// Default shrink applied to the Glorot draw of W2 so an untrained block sits
// close to the identity map.
inline constexpr double kOutputInitScale = 0.1;

// W1 Glorot-uniform; W2 Glorot-uniform times output_scale; biases zero.
template <class T>
ResidualBlock<T> block_init(Rng& rng, std::size_t dim, std::size_t hidden,
                            double output_scale = kOutputInitScale) {
  require(dim >= 1 && hidden >= 1, "block_init: dimensions must be >= 1");
  const double bound = std::sqrt(6.0 / static_cast<double>(dim + hidden));
  std::uniform_real_distribution<double> u(-bound, bound);
  ResidualBlock<T> b;
  b.w1 = Matrix<T>(hidden, dim);
  for (auto& w : b.w1.flat()) w = static_cast<T>(u(rng));
  b.w2 = Matrix<T>(dim, hidden);
  for (auto& w : b.w2.flat()) w = static_cast<T>(output_scale * u(rng));
  b.b1.assign(hidden, T{});
  b.b2.assign(dim, T{});
  return b;
}

template <class To, class From>
ResidualBlock<To> cast_block(const ResidualBlock<From>& b) {
  ResidualBlock<To> out;
  out.w1 = cast<To>(b.w1);
  out.w2 = cast<To>(b.w2);
  out.b1.assign(b.b1.begin(), b.b1.end());
  out.b2.assign(b.b2.begin(), b.b2.end());
  return out;
}

template <class T>
bool same_parameters(const ResidualBlock<T>& a, const ResidualBlock<T>& b) {
  return a.w1 == b.w1 && a.b1 == b.b1 && a.w2 == b.w2 && a.b2 == b.b2;
}

template <class T>
Matrix<T> block_forward(const ResidualBlock<T>& b, const Matrix<T>& x,
                        BlockCache<T>* cache = nullptr) {
  if (x.cols() != b.dim())
    throw InvalidArgument("block_forward: input width " + std::to_string(x.cols()) +
                          " != block dim " + std::to_string(b.dim()));
  Matrix<T> h(x.rows(), b.hidden());
  gemm<T>(Trans::No, Trans::Yes, T{1}, x, b.w1, T{0}, h);
  add_row_bias<T>(h, b.b1);
  tanh_inplace<T>(h.flat());
  Matrix<T> y = x;
  gemm<T>(Trans::No, Trans::Yes, T{1}, h, b.w2, T{1}, y);
  add_row_bias<T>(y, b.b2);
  if (cache != nullptr) {
    cache->x = x;
    cache->h = std::move(h);
    cache->block = &b;
    cache->version = b.version;
  }
  return y;
}

template <class T>
std::vector<T> block_forward(const ResidualBlock<T>& b, std::span<const T> x) {
  Matrix<T> m(1, x.size(), std::vector<T>(x.begin(), x.end()));
  return block_forward(b, m).storage();
}

// Returns dL/dx. Parameter gradients are written to grads when it is non-null
// (they are skipped entirely otherwise, which is what symbol optimization uses).
template <class T>
Matrix<T> block_backward(const ResidualBlock<T>& b, const BlockCache<T>& cache,
                         const Matrix<T>& dy, BlockGrads<T>* grads) {
  if (cache.block != &b || cache.version != b.version)
    throw InvalidArgument("block_backward: stale or mismatched forward cache");
  if (dy.rows() != cache.x.rows() || dy.cols() != b.dim())
    throw InvalidArgument("block_backward: upstream gradient shape mismatch");

  Matrix<T> dz(dy.rows(), b.hidden());
  gemm<T>(Trans::No, Trans::No, T{1}, dy, b.w2, T{0}, dz);
  for (std::size_t i = 0; i < dz.size(); ++i) {
    const T h = cache.h.data()[i];
    dz.data()[i] *= T{1} - h * h;
  }
  if (grads != nullptr) {
    grads->w2 = Matrix<T>(b.dim(), b.hidden());
    gemm<T>(Trans::Yes, Trans::No, T{1}, dy, cache.h, T{0}, grads->w2);
    grads->b2.assign(b.dim(), T{});
    column_sums<T>(dy, grads->b2);
    grads->w1 = Matrix<T>(b.hidden(), b.dim());
    gemm<T>(Trans::Yes, Trans::No, T{1}, dz, cache.x, T{0}, grads->w1);
    grads->b1.assign(b.hidden(), T{});
    column_sums<T>(dz, grads->b1);
  }
  Matrix<T> dx = dy;
  gemm<T>(Trans::No, Trans::No, T{1}, dz, b.w1, T{1}, dx);
  return dx;
}

// ---- losses ----------------------------------------------------------------------

template <class T>
struct LossReport {
  double value = 0.0;         // mean over rows
  std::vector<double> rows;   // per-row loss
  Matrix<T> grad;             // d value / d pred
};

// Per row: 1 - mean_k cos(pi (pred_k - target_k)). The gradient is that of the
// batch mean, (pi / (N * rows)) sin(pi (pred - target)).
template <class T>
LossReport<T> phase_loss(const Matrix<T>& pred, const Matrix<T>& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(),
          "phase_loss: shape mismatch");
  require(pred.cols() >= 1, "phase_loss: empty rows");
  const std::size_t n = pred.cols();
  LossReport<T> r;
  r.grad = Matrix<T>(pred.rows(), n);
  r.rows.resize(pred.rows());
  std::vector<T> delta(n), s(n), c(n);
  const double gscale =
      std::numbers::pi / (static_cast<double>(n) * static_cast<double>(pred.rows()));
  double total = 0.0;
  for (std::size_t i = 0; i < pred.rows(); ++i) {
    const auto p = pred.row(i);
    const auto t = target.row(i);
    for (std::size_t k = 0; k < n; ++k) delta[k] = p[k] - t[k];
    sincospi<T>(delta, s, c);
    double acc = 0.0;
    auto g = r.grad.row(i);
    for (std::size_t k = 0; k < n; ++k) {
      acc += c[k];
      g[k] = static_cast<T>(gscale * s[k]);
    }
    r.rows[i] = 1.0 - acc / static_cast<double>(n);
    total += r.rows[i];
  }
  r.value = total / static_cast<double>(pred.rows());
  return r;
}

// Per row: 1 - cos(pred, target). Zero rows count as similarity 0.
template <class T>
LossReport<T> cosine_loss(const Matrix<T>& pred, const Matrix<T>& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(),
          "cosine_loss: shape mismatch");
  const std::size_t n = pred.cols();
  LossReport<T> r;
  r.grad = Matrix<T>(pred.rows(), n);
  r.rows.resize(pred.rows());
  const double inv_rows = 1.0 / static_cast<double>(pred.rows());
  double total = 0.0;
  for (std::size_t i = 0; i < pred.rows(); ++i) {
    const auto p = pred.row(i);
    const auto t = target.row(i);
    double dot = 0.0, pp = 0.0, tt = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      dot += double(p[k]) * t[k];
      pp += double(p[k]) * p[k];
      tt += double(t[k]) * t[k];
    }
    auto g = r.grad.row(i);
    if (pp == 0.0 || tt == 0.0) {
      r.rows[i] = 1.0;
      std::fill(g.begin(), g.end(), T{});
    } else {
      const double np = std::sqrt(pp), nt = std::sqrt(tt);
      const double cs = dot / (np * nt);
      r.rows[i] = 1.0 - cs;
      // d(-cos)/dp = -(t / (|p||t|) - cos * p / |p|^2)
      for (std::size_t k = 0; k < n; ++k)
        g[k] = static_cast<T>(-inv_rows * (t[k] / (np * nt) - cs * p[k] / pp));
    }
    total += r.rows[i];
  }
  r.value = total * inv_rows;
  return r;
}

template <class T>
LossReport<T> phase_loss(std::span<const T> pred, std::span<const double> target) {
  require(pred.size() == target.size(), "phase_loss: length mismatch");
  Matrix<T> p(1, pred.size(), std::vector<T>(pred.begin(), pred.end()));
  Matrix<T> t(1, target.size());
  for (std::size_t k = 0; k < target.size(); ++k) t.data()[k] = static_cast<T>(target[k]);
  return phase_loss(p, t);
}

// ---- Adam ------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class T>
struct TensorRef {
  std::string name;
  std::span<T> values;
};

template <class T>
struct AdamState {
  AdamConfig config;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::uint64_t step = 0;
};

template <class T>
AdamState<T> adam_init(const AdamConfig& cfg, std::span<const TensorRef<T>> params) {
  AdamState<T> s;
  s.config = cfg;
  for (const auto& p : params) {
    s.m.emplace_back(p.values.size(), T{});
    s.v.emplace_back(p.values.size(), T{});
  }
  return s;
}

// Validates every gradient before touching any parameter.
template <class T>
void adam_step(std::span<const TensorRef<T>> params, std::span<const std::span<const T>> grads,
               AdamState<T>& state) {
  require(params.size() == grads.size() && params.size() == state.m.size(),
          "adam_step: tensor count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(params[i].values.size() == grads[i].size() &&
                params[i].values.size() == state.m[i].size(),
            "adam_step: shape mismatch for tensor '" + params[i].name + "'");
    if (!all_finite(grads[i]))
      throw NumericError("adam_step: non-finite gradient in tensor '" + params[i].name + "'");
  }
  ++state.step;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  simd::AdamCoeffs k{static_cast<float>(c.lr),
                     static_cast<float>(c.beta1),
                     static_cast<float>(c.beta2),
                     static_cast<float>(c.eps),
                     static_cast<float>(1.0 - std::pow(c.beta1, t)),
                     static_cast<float>(1.0 - std::pow(c.beta2, t))};
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].values;
    const auto g = grads[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    if constexpr (std::is_same_v<T, float>) {
      simd::active_kernels().adam(p.data(), g.data(), m.data(), v.data(), p.size(), k);
    } else {
      const double bias1 = 1.0 - std::pow(c.beta1, t);
      const double bias2 = 1.0 - std::pow(c.beta2, t);
      for (std::size_t j = 0; j < p.size(); ++j) {
        m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
        v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
        p[j] -= c.lr * (m[j] / bias1) / (std::sqrt(v[j] / bias2) + c.eps);
      }
    }
  }
}

template <class T>
std::vector<TensorRef<T>> parameters(ResidualBlock<T>& b, const std::string& prefix) {
  return {{prefix + "w1", b.w1.flat()},
          {prefix + "b1", b.b1},
          {prefix + "w2", b.w2.flat()},
          {prefix + "b2", b.b2}};
}

template <class T>
std::vector<std::span<const T>> gradient_views(const BlockGrads<T>& g) {
  return {g.w1.flat(), g.b1, g.w2.flat(), g.b2};
}

}  // namespace bridge
