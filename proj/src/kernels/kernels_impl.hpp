#pragma once

#include <cstddef>

#if defined(__x86_64__) || defined(_M_X64)
#define RAGCODE_HAVE_X86 1
#else
#define RAGCODE_HAVE_X86 0
#endif

namespace ragcode::simd::detail {

double dot_scalar(const double* a, const double* b, std::size_t n);
void axpy_scalar(double alpha, const double* x, double* y, std::size_t n);
void row_dots_scalar(const double* rows, std::size_t num_rows, std::size_t dim,
                     const double* query, double* out);
void scale_scalar(double alpha, double* y, std::size_t n);
void vec_mat_acc_scalar(const double* a, std::size_t a_stride, std::size_t k, const double* b, std::size_t ldb,
                        std::size_t n, double* out);

#if RAGCODE_HAVE_X86
double dot_avx2(const double* a, const double* b, std::size_t n);
void axpy_avx2(double alpha, const double* x, double* y, std::size_t n);
void row_dots_avx2(const double* rows, std::size_t num_rows, std::size_t dim,
                   const double* query, double* out);
void scale_avx2(double alpha, double* y, std::size_t n);
void vec_mat_acc_avx2(const double* a, std::size_t a_stride, std::size_t k, const double* b, std::size_t ldb,
                      std::size_t n, double* out);
#endif

}  // namespace ragcode::simd::detail
