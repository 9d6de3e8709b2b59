#include "ragcode/tensor.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "ragcode/kernels.hpp"

namespace ragcode {

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Matrix::fill_normal(std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : data_) v = dist(rng);
}

namespace {

Matrix transposed(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

// out += a * b, row by row
void gemm_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  const auto& k = simd::active();
  for (std::size_t i = 0; i < a.rows(); ++i)
    k.vec_mat_acc(a.data() + i * a.cols(), 1, a.cols(), b.data(), b.cols(), b.cols(), out.data() + i * out.cols());
}

}  // namespace

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  assert(a.cols() == b.rows());
  if (out.rows() != a.rows() || out.cols() != b.cols()) out = Matrix(a.rows(), b.cols());
  else out.fill(0.0);
  gemm_acc(a, b, out);
}

void matmul_at_b_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  assert(a.rows() == b.rows() && out.rows() == a.cols() && out.cols() == b.cols());
  const auto& k = simd::active();
  for (std::size_t p = 0; p < a.cols(); ++p)
    k.vec_mat_acc(a.data() + p, a.cols(), a.rows(), b.data(), b.cols(), b.cols(), out.data() + p * out.cols());
}

void matmul_a_bt(const Matrix& a, const Matrix& b, Matrix& out) {
  assert(a.cols() == b.cols());
  if (out.rows() != a.rows() || out.cols() != b.rows()) out = Matrix(a.rows(), b.rows());
  else out.fill(0.0);
  gemm_acc(a, transposed(b), out);
}

void matmul_a_bt_acc(const Matrix& a, const Matrix& b, Matrix& out) {
  assert(a.cols() == b.cols() && out.rows() == a.rows() && out.cols() == b.rows());
  gemm_acc(a, transposed(b), out);
}

void add_row_bias(Matrix& out, std::span<const double> bias) {
  assert(bias.size() == out.cols());
  const auto& k = simd::active();
  for (std::size_t i = 0; i < out.rows(); ++i) k.axpy(1.0, bias.data(), out.data() + i * out.cols(), out.cols());
}

void accumulate_column_sums(const Matrix& g, std::span<double> bias_grad) {
  assert(bias_grad.size() == g.cols());
  const auto& k = simd::active();
  for (std::size_t i = 0; i < g.rows(); ++i) k.axpy(1.0, g.data() + i * g.cols(), bias_grad.data(), g.cols());
}

void softmax_rows(Matrix& m, std::span<const std::size_t> width) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const std::size_t w = width.empty() ? row.size() : width[r];
    if (w == 0) {
      std::fill(row.begin(), row.end(), 0.0);
      continue;
    }
    const double mx = *std::max_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(w));
    double total = 0.0;
    for (std::size_t c = 0; c < w; ++c) {
      row[c] = std::exp(row[c] - mx);
      total += row[c];
    }
    for (std::size_t c = 0; c < w; ++c) row[c] /= total;
    for (std::size_t c = w; c < row.size(); ++c) row[c] = 0.0;
  }
}

}  // namespace ragcode
