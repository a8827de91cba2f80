#include "ldc/kernels.hpp"

// AVX2 backend. Multiplies and adds stay separate (no FMA contraction) and the
// horizontal reduce is (s0+s2)+(s1+s3), matching the scalar reference exactly.

#if defined(__x86_64__) || defined(_M_X64) || defined(__i386__)
#define LDC_KERN_X86 1
#else
#define LDC_KERN_X86 0
#endif

#if LDC_KERN_X86
#include <immintrin.h>

namespace ldc::kern {
namespace {

__attribute__((target("avx2"))) inline double reduce4(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);       // [s0, s1]
  __m128d hi = _mm256_extractf128_pd(v, 1);     // [s2, s3]
  lo = _mm_add_pd(lo, hi);                      // [s0+s2, s1+s3]
  __m128d swap = _mm_unpackhi_pd(lo, lo);       // [s1+s3, s1+s3]
  return _mm_cvtsd_f64(_mm_add_sd(lo, swap));   // (s0+s2)+(s1+s3)
}

__attribute__((target("avx2"))) double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < n4; i += 4) {
    __m256d p = _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    acc = _mm256_add_pd(acc, p);
  }
  double s = reduce4(acc);
  for (std::size_t i = n4; i < n; ++i) s += x[i] * y[i];
  return s;
}

__attribute__((target("avx2"))) double sum_avx2(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < n4; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = reduce4(acc);
  for (std::size_t i = n4; i < n; ++i) s += x[i];
  return s;
}

__attribute__((target("avx2"))) double sumsq_avx2(const double* x, std::size_t n) {
  return dot_avx2(x, x, n);
}

__attribute__((target("avx2"))) void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  __m256d va = _mm256_set1_pd(a);
  std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < n4; i += 4) {
    __m256d p = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), p));
  }
  for (std::size_t i = n4; i < n; ++i) y[i] += a * x[i];
}

__attribute__((target("avx2"))) void scale_avx2(double a, double* x, std::size_t n) {
  __m256d va = _mm256_set1_pd(a);
  std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < n4; i += 4)
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (std::size_t i = n4; i < n; ++i) x[i] *= a;
}

__attribute__((target("avx2"))) void vadd_avx2(const double* x, double* y, std::size_t n) {
  std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < n4; i += 4)
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i)));
  for (std::size_t i = n4; i < n; ++i) y[i] += x[i];
}

__attribute__((target("avx2"))) void relu_avx2(const double* z, double* out, std::size_t n) {
  __m256d zero = _mm256_setzero_pd();
  std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < n4; i += 4)
    _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(z + i), zero));
  for (std::size_t i = n4; i < n; ++i) out[i] = z[i] > 0.0 ? z[i] : 0.0;
}

__attribute__((target("avx2"))) void relu_mask_avx2(const double* z, double* g, std::size_t n) {
  __m256d zero = _mm256_setzero_pd();
  std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < n4; i += 4) {
    __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(z + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(g + i, _mm256_and_pd(_mm256_loadu_pd(g + i), mask));
  }
  for (std::size_t i = n4; i < n; ++i) {
    if (!(z[i] > 0.0)) g[i] = 0.0;
  }
}

}  // namespace

const Ops* avx2_ops() {
  if (!__builtin_cpu_supports("avx2")) return nullptr;
  static const Ops table = {dot_avx2,  sum_avx2,  sumsq_avx2, axpy_avx2,
                            scale_avx2, vadd_avx2, relu_avx2,  relu_mask_avx2};
  return &table;
}

}  // namespace ldc::kern

#else

namespace ldc::kern {
const Ops* avx2_ops() { return nullptr; }
}  // namespace ldc::kern

#endif
