#include "ldc/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace ldc {
namespace {

// Plain Cholesky; false when a pivot is not strictly positive.
bool try_cholesky(const Matrix& a, double jitter, Matrix& lower) {
  std::size_t n = a.rows();
  lower = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a(j, j) + jitter - kern::sumsq(lower.row(j), j);
    if (!(diag > 0.0) || !std::isfinite(diag)) return false;
    double ljj = std::sqrt(diag);
    lower(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = a(i, j) - kern::dot(lower.row(i), lower.row(j), j);
      lower(i, j) = v / ljj;
    }
  }
  return true;
}

}  // namespace

CholResult cholesky_psd(const Matrix& cov, double jitter_start) {
  if (cov.rows() != cov.cols() || cov.rows() == 0)
    fail(Err::DimensionMismatch, "cholesky_psd needs a square matrix");
  if (!cov.all_finite()) fail(Err::NonFinite, "cholesky_psd input");
  if (cov.max_asymmetry() > 1e-9) fail(Err::DimensionMismatch, "cholesky_psd input not symmetric");
  if (!(jitter_start > 0.0)) fail(Err::BadSpec, "jitter_start must be positive");

  double cap = 1e-2 * cov.trace() / static_cast<double>(cov.rows());
  if (!(cap > jitter_start)) cap = jitter_start;

  Matrix lower;
  if (try_cholesky(cov, 0.0, lower)) return {std::move(lower), 0.0};
  for (double eps = jitter_start;; eps *= 10.0) {
    bool last = eps >= cap;
    if (last) eps = cap;
    if (try_cholesky(cov, eps, lower)) return {std::move(lower), eps};
    if (last) break;
  }
  fail(Err::NotPSD, "jitter schedule exhausted");
}

void solve_lower_inplace(const Matrix& lower, double* b) {
  std::size_t n = lower.rows();
  for (std::size_t i = 0; i < n; ++i)
    b[i] = (b[i] - kern::dot(lower.row(i), b, i)) / lower(i, i);
}

void solve_lower_transposed_inplace(const Matrix& lower, double* b) {
  std::size_t n = lower.rows();
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= lower(k, ii) * b[k];
    b[ii] = s / lower(ii, ii);
  }
}

Matrix solve_lower_matrix(const Matrix& lower, const Matrix& b) {
  if (lower.rows() != b.rows()) fail(Err::DimensionMismatch, "solve_lower_matrix dims");
  std::size_t n = b.rows(), m = b.cols();
  Matrix x = b;
  Vector col(n);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = x(i, j);
    solve_lower_inplace(lower, col.data());
    for (std::size_t i = 0; i < n; ++i) x(i, j) = col[i];
  }
  return x;
}

double logdet_from_cholesky(const Matrix& lower) {
  double s = 0.0;
  for (std::size_t i = 0; i < lower.rows(); ++i) s += std::log(lower(i, i));
  return 2.0 * s;
}

Matrix spd_inverse(const Matrix& a, double jitter_start) {
  CholResult ch = cholesky_psd(a, jitter_start);
  std::size_t n = a.rows();
  // inv = L^-T L^-1, column by column of the identity
  Matrix inv(n, n);
  Vector col(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::fill(col.begin(), col.end(), 0.0);
    col[j] = 1.0;
    solve_lower_inplace(ch.lower, col.data());
    solve_lower_transposed_inplace(ch.lower, col.data());
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
  }
  inv.symmetrize();
  return inv;
}

EigResult eigen_symmetric(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0)
    fail(Err::DimensionMismatch, "eigen_symmetric needs a square matrix");
  std::size_t n = a.rows();
  Matrix d = a;
  d.symmetrize();
  Matrix v = Matrix::identity(n);

  const int max_sweeps = 100;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += d(p, q) * d(p, q);
    double scale = d.frobenius_norm();
    if (std::sqrt(off) <= 1e-15 * std::max(scale, 1e-300)) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double apq = d(p, q);
        if (apq == 0.0) continue;
        double app = d(p, p), aqq = d(q, q);
        double tau = (aqq - app) / (2.0 * apq);
        double t = (tau >= 0.0) ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double dkp = d(k, p), dkq = d(k, q);
          d(k, p) = c * dkp - s * dkq;
          d(k, q) = s * dkp + c * dkq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double dpk = d(p, k), dqk = d(q, k);
          d(p, k) = c * dpk - s * dqk;
          d(q, k) = s * dpk + c * dqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  // sort ascending, permuting eigenvector columns alongside
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return d(x, x) < d(y, y); });
  EigResult out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = d(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
  }
  return out;
}

Matrix psd_clamp_from_eigen(const EigResult& eig, double floor_value) {
  std::size_t n = eig.values.size();
  Matrix out(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    double lam = std::max(eig.values[k], floor_value);
    Vector col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = eig.vectors(i, k);
    rank1_update(out, lam, col.data(), col.data());
  }
  out.symmetrize();
  return out;
}

Matrix psd_clamp(const Matrix& a, double floor_value) {
  return psd_clamp_from_eigen(eigen_symmetric(a), floor_value);
}

Matrix sym_sqrt(const Matrix& a) {
  EigResult eig = eigen_symmetric(a);
  std::size_t n = eig.values.size();
  Matrix out(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    double lam = std::sqrt(std::max(eig.values[k], 0.0));
    Vector col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = eig.vectors(i, k);
    rank1_update(out, lam, col.data(), col.data());
  }
  out.symmetrize();
  return out;
}

Matrix sym_inv_sqrt(const Matrix& a, double rel_floor) {
  EigResult eig = eigen_symmetric(a);
  std::size_t n = eig.values.size();
  double top = std::max(eig.values.back(), 0.0);
  double floor_value = std::max(top * rel_floor, 1e-300);
  Matrix out(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    double lam = 1.0 / std::sqrt(std::max(eig.values[k], floor_value));
    Vector col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = eig.vectors(i, k);
    rank1_update(out, lam, col.data(), col.data());
  }
  out.symmetrize();
  return out;
}

Matrix cholesky_backward(const Matrix& lower, const Matrix& lower_bar) {
  std::size_t n = lower.rows();
  // P = Phi(L^T Lbar): lower triangle, halved diagonal
  Matrix p(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = 0.0;
      for (std::size_t k = std::max(i, j); k < n; ++k) s += lower(k, i) * lower_bar(k, j);
      p(i, j) = (i == j) ? 0.5 * s : s;
    }
  }
  // S = L^-T P L^-1: solve L^T X = P column-wise, then rows against L
  Vector col(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = p(i, j);
    solve_lower_transposed_inplace(lower, col.data());
    for (std::size_t i = 0; i < n; ++i) p(i, j) = col[i];
  }
  // now solve X L^T(?) -> rows: (P L^-1) row r solves L^T y = row^T
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) col[j] = p(i, j);
    solve_lower_transposed_inplace(lower, col.data());
    for (std::size_t j = 0; j < n; ++j) p(i, j) = col[j];
  }
  p.symmetrize();
  return p;
}

Matrix psd_clamp_backward(const EigResult& eig, double floor_value, const Matrix& c_bar) {
  std::size_t n = eig.values.size();
  // M = V^T Cbar V
  Matrix m = matmul(matmul(eig.vectors.transposed(), c_bar), eig.vectors);
  // scale by the divided-difference kernel of g(x) = max(x, floor)
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double li = eig.values[i], lj = eig.values[j];
      double k;
      if (std::fabs(li - lj) > 1e-12 * std::max({std::fabs(li), std::fabs(lj), 1.0})) {
        k = (std::max(li, floor_value) - std::max(lj, floor_value)) / (li - lj);
      } else {
        k = (li > floor_value) ? 1.0 : 0.0;
      }
      m(i, j) *= k;
    }
  }
  Matrix out = matmul(matmul(eig.vectors, m), eig.vectors.transposed());
  out.symmetrize();
  return out;
}

}  // namespace ldc
