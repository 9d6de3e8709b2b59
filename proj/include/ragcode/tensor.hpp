#pragma once
// Row-major dense matrix and the handful of products the models need.

#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace ragcode {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  void fill(double v);
  void fill_normal(std::mt19937_64& rng, double stddev);

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// out = a * b
void matmul(const Matrix& a, const Matrix& b, Matrix& out);
/// out += a^T * b
void matmul_at_b_acc(const Matrix& a, const Matrix& b, Matrix& out);
/// out = a * b^T
void matmul_a_bt(const Matrix& a, const Matrix& b, Matrix& out);
/// out += a * b^T
void matmul_a_bt_acc(const Matrix& a, const Matrix& b, Matrix& out);
/// Adds `bias` (length out.cols()) to every row.
void add_row_bias(Matrix& out, std::span<const double> bias);
/// bias_grad += column sums of g
void accumulate_column_sums(const Matrix& g, std::span<double> bias_grad);

/// In-place numerically stable softmax of each row over its first `width[r]`
/// entries (remaining entries are set to zero). Passing an empty span uses the
/// whole row.
void softmax_rows(Matrix& m, std::span<const std::size_t> width = {});

}  // namespace ragcode
