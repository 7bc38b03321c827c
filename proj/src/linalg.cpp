#include "bridge/linalg.hpp"

#include <cmath>

#include "bridge/error.hpp"

namespace bridge {

void cholesky(Matrix<double>& a) {
  require(a.rows() == a.cols(), "cholesky: matrix must be square");
  const std::size_t n = a.rows();
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > 0.0)) throw NumericError("cholesky: matrix is not positive definite");
    const double ljj = std::sqrt(d);
    a(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      const double* ri = &a(i, 0);
      const double* rj = &a(j, 0);
      for (std::size_t k = 0; k < j; ++k) s -= ri[k] * rj[k];
      a(i, j) = s / ljj;
    }
    for (std::size_t i = 0; i < j; ++i) a(i, j) = 0.0;
  }
}

void cholesky_solve(const Matrix<double>& l, Matrix<double>& b) {
  require(l.rows() == b.rows(), "cholesky_solve: shape mismatch");
  const std::size_t n = l.rows(), m = b.cols();
  // L Y = B
  for (std::size_t i = 0; i < n; ++i) {
    auto bi = b.row(i);
    for (std::size_t k = 0; k < i; ++k) {
      const double f = l(i, k);
      const auto bk = b.row(k);
      for (std::size_t c = 0; c < m; ++c) bi[c] -= f * bk[c];
    }
    const double inv = 1.0 / l(i, i);
    for (std::size_t c = 0; c < m; ++c) bi[c] *= inv;
  }
  // L^T X = Y
  for (std::size_t i = n; i-- > 0;) {
    auto bi = b.row(i);
    for (std::size_t k = i + 1; k < n; ++k) {
      const double f = l(k, i);
      const auto bk = b.row(k);
      for (std::size_t c = 0; c < m; ++c) bi[c] -= f * bk[c];
    }
    const double inv = 1.0 / l(i, i);
    for (std::size_t c = 0; c < m; ++c) bi[c] *= inv;
  }
}

Matrix<double> transpose(const Matrix<double>& a) {
  Matrix<double> t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Matrix<double> pseudoinverse(const Matrix<double>& p, double jitter) {
  require(p.rows() >= 1 && p.cols() >= 1, "pseudoinverse: empty matrix");
  if (p.rows() >= p.cols()) {
    Matrix<double> g = matmul(Trans::Yes, Trans::No, p, p);
    for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) += jitter;
    cholesky(g);
    Matrix<double> x = transpose(p);
    cholesky_solve(g, x);
    return x;
  }
  Matrix<double> g = matmul(Trans::No, Trans::Yes, p, p);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) += jitter;
  cholesky(g);
  Matrix<double> y = p;
  cholesky_solve(g, y);
  return transpose(y);
}

}  // namespace bridge
