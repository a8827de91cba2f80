#pragma once

#include <cstddef>

// Data-parallel inner loops behind the numeric core. Every backend follows the
// same accumulation contract (four independent partial sums over the 4-aligned
// prefix, combined as (s0+s2)+(s1+s3), then a sequential tail), so scalar and
// SIMD variants produce bitwise-identical results and runs stay reproducible
// no matter which backend the dispatcher picks.

namespace ldc::kern {

enum class Backend { Scalar, Avx2, Neon };

struct Ops {
  double (*dot)(const double* x, const double* y, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  double (*sumsq)(const double* x, std::size_t n);
  void (*axpy)(double a, const double* x, double* y, std::size_t n);  // y += a*x
  void (*scale)(double a, double* x, std::size_t n);                  // x *= a
  void (*vadd)(const double* x, double* y, std::size_t n);            // y += x
  void (*relu)(const double* z, double* out, std::size_t n);          // out = max(z, 0)
  void (*relu_mask)(const double* z, double* g, std::size_t n);       // g = z > 0 ? g : 0
};

const Ops& scalar_ops();
const Ops* avx2_ops();  // nullptr when not compiled in or CPU lacks AVX2
const Ops* neon_ops();  // nullptr off-ARM

// Active table: picked once at startup from CPU features; the LDC_KERNELS
// env var (scalar|avx2|neon|auto) overrides for testing.
const Ops& ops();
Backend active_backend();
const char* backend_name(Backend b);

inline double dot(const double* x, const double* y, std::size_t n) { return ops().dot(x, y, n); }
inline double sum(const double* x, std::size_t n) { return ops().sum(x, n); }
inline double sumsq(const double* x, std::size_t n) { return ops().sumsq(x, n); }
inline void axpy(double a, const double* x, double* y, std::size_t n) { ops().axpy(a, x, y, n); }
inline void scale(double a, double* x, std::size_t n) { ops().scale(a, x, n); }
inline void vadd(const double* x, double* y, std::size_t n) { ops().vadd(x, y, n); }
inline void relu(const double* z, double* out, std::size_t n) { ops().relu(z, out, n); }
inline void relu_mask(const double* z, double* g, std::size_t n) { ops().relu_mask(z, g, n); }

}  // namespace ldc::kern
