#pragma once

#include "ldc/matrix.hpp"

namespace ldc {

struct CholResult {
  Matrix lower;    // L with L L^T = input + jitter*I
  double jitter;   // epsilon actually applied
};

// Cholesky with a geometric jitter schedule {0, j, 10j, ...} capped at
// 1e-2*trace/d. Throws NotPSD when the schedule is exhausted.
CholResult cholesky_psd(const Matrix& cov, double jitter_start);

// In-place triangular solves against a lower factor L.
void solve_lower_inplace(const Matrix& lower, double* b);        // L y = b
void solve_lower_transposed_inplace(const Matrix& lower, double* b);  // L^T x = b

// X with L X = B, column by column.
Matrix solve_lower_matrix(const Matrix& lower, const Matrix& b);

double logdet_from_cholesky(const Matrix& lower);

// SPD inverse via Cholesky of (a + jitter guard when needed).
Matrix spd_inverse(const Matrix& a, double jitter_start = 1e-12);

struct EigResult {
  Vector values;   // ascending
  Matrix vectors;  // columns are eigenvectors; A = V diag(values) V^T
};

// Cyclic Jacobi for symmetric matrices; deterministic rotation order.
EigResult eigen_symmetric(const Matrix& a);

// V max(values, floor) V^T, symmetrized.
Matrix psd_clamp(const Matrix& a, double floor_value);
Matrix psd_clamp_from_eigen(const EigResult& eig, double floor_value);

// Symmetric matrix square root with eigenvalues floored at zero.
Matrix sym_sqrt(const Matrix& a);
// Symmetric inverse square root; eigenvalues floored at eps*max before 1/sqrt.
Matrix sym_inv_sqrt(const Matrix& a, double rel_floor = 1e-12);

// VJP of L = chol(C) for symmetric C: given dLoss/dL (lower triangular),
// returns the symmetric-convention dLoss/dC.
Matrix cholesky_backward(const Matrix& lower, const Matrix& lower_bar);

// VJP of C = V max(lambda, floor) V^T at the decomposition of the input:
// given symmetric dLoss/dC, returns symmetric dLoss/dInput.
Matrix psd_clamp_backward(const EigResult& eig, double floor_value, const Matrix& c_bar);

}  // namespace ldc
