#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "ldc/errors.hpp"
#include "ldc/kernels.hpp"

namespace ldc {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles. Value type; all heavier routines live in
// linalg.hpp and route their inner loops through the kernel layer.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return a_.size(); }
  bool empty() const { return a_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

  double* row(std::size_t i) { return a_.data() + i * cols_; }
  const double* row(std::size_t i) const { return a_.data() + i * cols_; }

  double* data() { return a_.data(); }
  const double* data() const { return a_.data(); }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  Matrix& operator+=(const Matrix& o) {
    require_same_shape(o);
    kern::vadd(o.data(), data(), size());
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    require_same_shape(o);
    kern::axpy(-1.0, o.data(), data(), size());
    return *this;
  }
  Matrix& operator*=(double s) {
    kern::scale(s, data(), size());
    return *this;
  }

  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(Matrix a, double s) { return a *= s; }
  friend Matrix operator*(double s, Matrix a) { return a *= s; }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  void symmetrize() {
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = i + 1; j < cols_; ++j) {
        double v = 0.5 * ((*this)(i, j) + (*this)(j, i));
        (*this)(i, j) = v;
        (*this)(j, i) = v;
      }
  }

  double max_asymmetry() const {
    double m = 0.0;
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = i + 1; j < cols_; ++j)
        m = std::max(m, std::fabs((*this)(i, j) - (*this)(j, i)));
    return m;
  }

  double trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < rows_ && i < cols_; ++i) t += (*this)(i, i);
    return t;
  }

  double frobenius_norm() const { return std::sqrt(kern::sumsq(data(), size())); }

  bool all_finite() const {
    for (double v : a_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && a_ == o.a_;
  }

 private:
  void require_same_shape(const Matrix& o) const {
    if (!same_shape(o)) fail(Err::DimensionMismatch, "matrix shapes differ");
  }

  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> a_;
};

// y = A x
inline void matvec(const Matrix& a, const double* x, double* y) {
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = kern::dot(a.row(i), x, a.cols());
}

inline Vector matvec(const Matrix& a, const Vector& x) {
  if (x.size() != a.cols()) fail(Err::DimensionMismatch, "matvec dims");
  Vector y(a.rows());
  matvec(a, x.data(), y.data());
  return y;
}

// C = A B
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) fail(Err::DimensionMismatch, "matmul dims");
  Matrix bt = b.transposed();
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) = kern::dot(a.row(i), bt.row(j), a.cols());
  return c;
}

// A += alpha * x y^T
inline void rank1_update(Matrix& a, double alpha, const double* x, const double* y) {
  for (std::size_t i = 0; i < a.rows(); ++i) kern::axpy(alpha * x[i], y, a.row(i), a.cols());
}

inline Matrix outer(const Vector& x, const Vector& y) {
  Matrix m(x.size(), y.size());
  rank1_update(m, 1.0, x.data(), y.data());
  return m;
}

inline double norm2(const Vector& v) { return std::sqrt(kern::sumsq(v.data(), v.size())); }

}  // namespace ldc
