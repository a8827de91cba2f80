#include "ldc/kernels.hpp"

// NEON backend (aarch64). Two 2-lane registers stand in for one 4-lane AVX2
// register; the reduce keeps the (s0+s2)+(s1+s3) order of the reference.

#if defined(__aarch64__) && defined(__ARM_NEON)
#include <arm_neon.h>

namespace ldc::kern {
namespace {

inline double reduce4(float64x2_t a, float64x2_t b) {
  // a = [s0, s1], b = [s2, s3]
  float64x2_t lo = vaddq_f64(a, b);  // [s0+s2, s1+s3]
  return vgetq_lane_f64(lo, 0) + vgetq_lane_f64(lo, 1);
}

double dot_neon(const double* x, const double* y, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0), acc1 = vdupq_n_f64(0.0);
  std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < n4; i += 4) {
    acc0 = vaddq_f64(acc0, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
    acc1 = vaddq_f64(acc1, vmulq_f64(vld1q_f64(x + i + 2), vld1q_f64(y + i + 2)));
  }
  double s = reduce4(acc0, acc1);
  for (std::size_t i = n4; i < n; ++i) s += x[i] * y[i];
  return s;
}

double sum_neon(const double* x, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0), acc1 = vdupq_n_f64(0.0);
  std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < n4; i += 4) {
    acc0 = vaddq_f64(acc0, vld1q_f64(x + i));
    acc1 = vaddq_f64(acc1, vld1q_f64(x + i + 2));
  }
  double s = reduce4(acc0, acc1);
  for (std::size_t i = n4; i < n; ++i) s += x[i];
  return s;
}

double sumsq_neon(const double* x, std::size_t n) { return dot_neon(x, x, n); }

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
  float64x2_t va = vdupq_n_f64(a);
  std::size_t n2 = n & ~std::size_t(1);
  for (std::size_t i = 0; i < n2; i += 2)
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
  for (std::size_t i = n2; i < n; ++i) y[i] += a * x[i];
}

void scale_neon(double a, double* x, std::size_t n) {
  float64x2_t va = vdupq_n_f64(a);
  std::size_t n2 = n & ~std::size_t(1);
  for (std::size_t i = 0; i < n2; i += 2) vst1q_f64(x + i, vmulq_f64(va, vld1q_f64(x + i)));
  for (std::size_t i = n2; i < n; ++i) x[i] *= a;
}

void vadd_neon(const double* x, double* y, std::size_t n) {
  std::size_t n2 = n & ~std::size_t(1);
  for (std::size_t i = 0; i < n2; i += 2)
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vld1q_f64(x + i)));
  for (std::size_t i = n2; i < n; ++i) y[i] += x[i];
}

void relu_neon(const double* z, double* out, std::size_t n) {
  float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t n2 = n & ~std::size_t(1);
  for (std::size_t i = 0; i < n2; i += 2) vst1q_f64(out + i, vmaxq_f64(vld1q_f64(z + i), zero));
  for (std::size_t i = n2; i < n; ++i) out[i] = z[i] > 0.0 ? z[i] : 0.0;
}

void relu_mask_neon(const double* z, double* g, std::size_t n) {
  float64x2_t zero = vdupq_n_f64(0.0);
  std::size_t n2 = n & ~std::size_t(1);
  for (std::size_t i = 0; i < n2; i += 2) {
    uint64x2_t mask = vcgtq_f64(vld1q_f64(z + i), zero);
    uint64x2_t kept = vandq_u64(vreinterpretq_u64_f64(vld1q_f64(g + i)), mask);
    vst1q_f64(g + i, vreinterpretq_f64_u64(kept));
  }
  for (std::size_t i = n2; i < n; ++i) {
    if (!(z[i] > 0.0)) g[i] = 0.0;
  }
}

}  // namespace

const Ops* neon_ops() {
  static const Ops table = {dot_neon,  sum_neon,  sumsq_neon, axpy_neon,
                            scale_neon, vadd_neon, relu_neon,  relu_mask_neon};
  return &table;
}

}  // namespace ldc::kern

#else

namespace ldc::kern {
const Ops* neon_ops() { return nullptr; }
}  // namespace ldc::kern

#endif
