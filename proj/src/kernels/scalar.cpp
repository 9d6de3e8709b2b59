#include "kernels_impl.hpp"

namespace ragcode::simd::detail {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void row_dots_scalar(const double* rows, std::size_t num_rows, std::size_t dim,
                     const double* query, double* out) {
  for (std::size_t r = 0; r < num_rows; ++r) out[r] = dot_scalar(rows + r * dim, query, dim);
}

void scale_scalar(double alpha, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] *= alpha;
}

void vec_mat_acc_scalar(const double* a, std::size_t a_stride, std::size_t k, const double* b, std::size_t ldb,
                        std::size_t n, double* out) {
  for (std::size_t p = 0; p < k; ++p) {
    const double s = a[p * a_stride];
    const double* row = b + p * ldb;
    for (std::size_t j = 0; j < n; ++j) out[j] += s * row[j];
  }
}

}  // namespace ragcode::simd::detail
