#pragma once

// Row-major dense matrices and the handful of batched primitives the channels,
// vectorizers and autoencoder are built from. float routes through the SIMD
// kernel table; double uses straight-line reference loops (gradient checks and
// the linear algebra that needs the extra precision).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "bridge/error.hpp"
#include "bridge/simd/kernels.hpp"

namespace bridge {

using simd::Trans;

template <class T>
class Matrix {
 public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    require(data_.size() == rows_ * cols_, "Matrix: data size does not match shape");
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> flat() noexcept { return data_; }
  std::span<const T> flat() const noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  std::span<T> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const T> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  T& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const noexcept {
    return data_[i * cols_ + j];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

template <class To, class From>
Matrix<To> cast(const Matrix<From>& m) {
  Matrix<To> out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) out.data()[i] = static_cast<To>(m.data()[i]);
  return out;
}

// Rows [first, first + count) of m, or the rows listed in idx.
template <class T>
Matrix<T> gather_rows(const Matrix<T>& m, std::span<const std::size_t> idx) {
  Matrix<T> out(idx.size(), m.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    require(idx[r] < m.rows(), "gather_rows: index out of range");
    const auto src = m.row(idx[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

namespace detail {

template <class T>
void gemm_reference(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, T alpha,
                    const T* a, std::size_t lda, const T* b, std::size_t ldb, T beta, T* c,
                    std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    for (std::size_t j = 0; j < n; ++j) crow[j] = beta == T{} ? T{} : beta * crow[j];
    for (std::size_t p = 0; p < k; ++p) {
      const T av = alpha * (ta == Trans::Yes ? a[p * lda + i] : a[i * lda + p]);
      if (tb == Trans::No) {
        const T* brow = b + p * ldb;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * b[j * ldb + p];
      }
    }
  }
}

}  // namespace detail

// c = alpha * op(a) * op(b) + beta * c. c must already have the result shape.
template <class T>
void gemm(Trans ta, Trans tb, T alpha, const Matrix<T>& a, const Matrix<T>& b, T beta,
          Matrix<T>& c) {
  const std::size_t m = ta == Trans::Yes ? a.cols() : a.rows();
  const std::size_t k = ta == Trans::Yes ? a.rows() : a.cols();
  const std::size_t kb = tb == Trans::Yes ? b.cols() : b.rows();
  const std::size_t n = tb == Trans::Yes ? b.rows() : b.cols();
  if (k != kb || c.rows() != m || c.cols() != n) {
    throw InvalidArgument("gemm: shape mismatch (" + std::to_string(m) + "x" +
                          std::to_string(k) + " * " + std::to_string(kb) + "x" +
                          std::to_string(n) + " -> " + std::to_string(c.rows()) + "x" +
                          std::to_string(c.cols()) + ")");
  }
  if constexpr (std::is_same_v<T, float>) {
    simd::active_kernels().gemm(ta, tb, m, n, k, alpha, a.data(), a.cols(), b.data(), b.cols(),
                                beta, c.data(), c.cols());
  } else {
    detail::gemm_reference<T>(ta, tb, m, n, k, alpha, a.data(), a.cols(), b.data(), b.cols(),
                              beta, c.data(), c.cols());
  }
}

template <class T>
Matrix<T> matmul(Trans ta, Trans tb, const Matrix<T>& a, const Matrix<T>& b) {
  Matrix<T> c(ta == Trans::Yes ? a.cols() : a.rows(), tb == Trans::Yes ? b.rows() : b.cols());
  gemm<T>(ta, tb, T{1}, a, b, T{0}, c);
  return c;
}

template <class T>
void sincospi(std::span<const T> x, std::span<T> s, std::span<T> c) {
  require(s.size() == x.size() && c.size() == x.size(), "sincospi: size mismatch");
  if constexpr (std::is_same_v<T, float>) {
    simd::active_kernels().sincospi(x.data(), s.data(), c.data(), x.size());
  } else {
    constexpr double kPi = 3.14159265358979323846;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = x[i] - 2.0 * std::nearbyint(0.5 * x[i]);
      s[i] = std::sin(kPi * r);
      c[i] = std::cos(kPi * r);
    }
  }
}

template <class T>
void tanh_inplace(std::span<T> x) {
  if constexpr (std::is_same_v<T, float>) {
    simd::active_kernels().tanh(x.data(), x.data(), x.size());
  } else {
    for (auto& v : x) v = std::tanh(v);
  }
}

template <class T>
void add_row_bias(Matrix<T>& m, std::span<const T> bias) {
  require(bias.size() == m.cols(), "add_row_bias: width mismatch");
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias[j];
  }
}

// out[j] = sum_i m(i, j)
template <class T>
void column_sums(const Matrix<T>& m, std::span<T> out) {
  require(out.size() == m.cols(), "column_sums: width mismatch");
  std::fill(out.begin(), out.end(), T{});
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) out[j] += r[j];
  }
}

template <class T>
bool all_finite(std::span<const T> v) {
  for (const T x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace bridge
