#pragma once

// Symmetric positive-definite solves for the vectorizer pseudoinverse.

#include "bridge/tensor.hpp"

namespace bridge {

// In-place lower Cholesky factor of a (upper triangle is zeroed).
// Throws NumericError when a is not positive definite.
void cholesky(Matrix<double>& a);

// Solves (L L^T) X = B for X, overwriting B. L from cholesky().
void cholesky_solve(const Matrix<double>& l, Matrix<double>& b);

// Moore-Penrose pseudoinverse of a full-rank p via the normal equations with
// diagonal jitter: (P^T P + jI)^-1 P^T when rows >= cols, else P^T (P P^T + jI)^-1.
Matrix<double> pseudoinverse(const Matrix<double>& p, double jitter = 1e-8);

Matrix<double> transpose(const Matrix<double>& a);

}  // namespace bridge
