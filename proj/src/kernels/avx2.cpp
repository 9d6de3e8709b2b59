// AVX2 + FMA variants. Compiled with per-function target attributes so the
// rest of the library stays baseline x86-64 and dispatch decides at runtime.

#include "kernels_impl.hpp"

#if RAGCODE_HAVE_X86

#include <immintrin.h>

#include <cmath>

#define RAGCODE_AVX2 __attribute__((target("avx2,fma")))

namespace ragcode::simd::detail {

namespace {

RAGCODE_AVX2 inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

}  // namespace

RAGCODE_AVX2 double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

RAGCODE_AVX2 void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

RAGCODE_AVX2 void row_dots_avx2(const double* rows, std::size_t num_rows, std::size_t dim,
                                const double* query, double* out) {
  for (std::size_t r = 0; r < num_rows; ++r) out[r] = dot_avx2(rows + r * dim, query, dim);
}

RAGCODE_AVX2 void scale_avx2(double alpha, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, _mm256_mul_pd(va, _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] *= alpha;
}

// Accumulators stay in registers across the whole k loop: 16 columns at a
// time, then 4, then a scalar tail.
RAGCODE_AVX2 void vec_mat_acc_avx2(const double* a, std::size_t a_stride, std::size_t k, const double* b,
                                   std::size_t ldb, std::size_t n, double* out) {
  std::size_t j = 0;
  for (; j + 16 <= n; j += 16) {
    __m256d c0 = _mm256_loadu_pd(out + j);
    __m256d c1 = _mm256_loadu_pd(out + j + 4);
    __m256d c2 = _mm256_loadu_pd(out + j + 8);
    __m256d c3 = _mm256_loadu_pd(out + j + 12);
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d s = _mm256_set1_pd(a[p * a_stride]);
      const double* row = b + p * ldb + j;
      c0 = _mm256_fmadd_pd(s, _mm256_loadu_pd(row), c0);
      c1 = _mm256_fmadd_pd(s, _mm256_loadu_pd(row + 4), c1);
      c2 = _mm256_fmadd_pd(s, _mm256_loadu_pd(row + 8), c2);
      c3 = _mm256_fmadd_pd(s, _mm256_loadu_pd(row + 12), c3);
    }
    _mm256_storeu_pd(out + j, c0);
    _mm256_storeu_pd(out + j + 4, c1);
    _mm256_storeu_pd(out + j + 8, c2);
    _mm256_storeu_pd(out + j + 12, c3);
  }
  for (; j + 4 <= n; j += 4) {
    __m256d c = _mm256_loadu_pd(out + j);
    for (std::size_t p = 0; p < k; ++p) c = _mm256_fmadd_pd(_mm256_set1_pd(a[p * a_stride]), _mm256_loadu_pd(b + p * ldb + j), c);
    _mm256_storeu_pd(out + j, c);
  }
  for (; j < n; ++j) {
    double c = out[j];
    for (std::size_t p = 0; p < k; ++p) c = std::fma(a[p * a_stride], b[p * ldb + j], c);
    out[j] = c;
  }
}

}  // namespace ragcode::simd::detail

#endif
