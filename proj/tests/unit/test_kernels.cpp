#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "ragcode/kernels.hpp"
#include "ragcode/tensor.hpp"

namespace simd = ragcode::simd;
using ragcode::Matrix;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

Matrix random_mat(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  Matrix m(r, c);
  m.fill_normal(rng, 1.0);
  return m;
}

void expect_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol * (1.0 + std::abs(a[i]))) << "at " << i;
}

class Avx2Equivalence : public ::testing::Test {
 protected:
  void SetUp() override {
    avx = simd::avx2_kernels();
    if (avx == nullptr) GTEST_SKIP() << "AVX2 not available";
  }
  const simd::KernelTable& ref = simd::scalar_kernels();
  const simd::KernelTable* avx = nullptr;
};

}  // namespace

TEST_F(Avx2Equivalence, Dot) {
  std::mt19937_64 rng(1);
  for (std::size_t n : {0, 1, 3, 4, 7, 8, 15, 16, 17, 33, 100, 257}) {
    auto a = random_vec(rng, n), b = random_vec(rng, n);
    EXPECT_NEAR(ref.dot(a.data(), b.data(), n), avx->dot(a.data(), b.data(), n), 1e-12 * (1.0 + n)) << n;
  }
}

TEST_F(Avx2Equivalence, AxpyAndScale) {
  std::mt19937_64 rng(2);
  for (std::size_t n : {0, 1, 5, 8, 13, 64, 99}) {
    auto x = random_vec(rng, n), y1 = random_vec(rng, n);
    auto y2 = y1;
    ref.axpy(0.37, x.data(), y1.data(), n);
    avx->axpy(0.37, x.data(), y2.data(), n);
    expect_close(y1, y2, 1e-14);
    ref.scale(-1.5, y1.data(), n);
    avx->scale(-1.5, y2.data(), n);
    expect_close(y1, y2, 1e-14);
  }
}

TEST_F(Avx2Equivalence, RowDots) {
  std::mt19937_64 rng(3);
  for (std::size_t dim : {1, 4, 9, 32, 37}) {
    const std::size_t rows = 11;
    auto m = random_vec(rng, rows * dim), q = random_vec(rng, dim);
    std::vector<double> o1(rows), o2(rows);
    ref.row_dots(m.data(), rows, dim, q.data(), o1.data());
    avx->row_dots(m.data(), rows, dim, q.data(), o2.data());
    expect_close(o1, o2, 1e-12);
  }
}

TEST_F(Avx2Equivalence, VecMatAcc) {
  std::mt19937_64 rng(4);
  for (std::size_t n : {1, 3, 4, 15, 16, 17, 40, 130}) {
    for (std::size_t stride : {1, 3}) {
      const std::size_t k = 9;
      auto a = random_vec(rng, k * stride), b = random_vec(rng, k * (n + 2));
      auto o1 = random_vec(rng, n);
      auto o2 = o1;
      ref.vec_mat_acc(a.data(), stride, k, b.data(), n + 2, n, o1.data());
      avx->vec_mat_acc(a.data(), stride, k, b.data(), n + 2, n, o2.data());
      expect_close(o1, o2, 1e-12);
    }
  }
}

TEST(Kernels, ScalarVecMatAccMatchesDefinition) {
  std::mt19937_64 rng(5);
  const std::size_t k = 4, n = 6, stride = 2, ldb = 7;
  auto a = random_vec(rng, k * stride), b = random_vec(rng, k * ldb);
  std::vector<double> out(n, 1.0);
  simd::scalar_kernels().vec_mat_acc(a.data(), stride, k, b.data(), ldb, n, out.data());
  for (std::size_t j = 0; j < n; ++j) {
    double want = 1.0;
    for (std::size_t p = 0; p < k; ++p) want += a[p * stride] * b[p * ldb + j];
    EXPECT_NEAR(out[j], want, 1e-12);
  }
}

TEST(Kernels, SelectSwitchesTable) {
  ASSERT_TRUE(simd::select(simd::Isa::scalar));
  EXPECT_EQ(simd::active().isa, simd::Isa::scalar);
  if (simd::avx2_kernels() != nullptr) {
    ASSERT_TRUE(simd::select(simd::Isa::avx2));
    EXPECT_EQ(simd::active().isa, simd::Isa::avx2);
  } else {
    EXPECT_FALSE(simd::select(simd::Isa::avx2));
  }
}

namespace {

Matrix naive(const Matrix& a, const Matrix& b, bool ta, bool tb) {
  const std::size_t m = ta ? a.cols() : a.rows();
  const std::size_t k = ta ? a.rows() : a.cols();
  const std::size_t n = tb ? b.rows() : b.cols();
  Matrix out(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0;
      for (std::size_t p = 0; p < k; ++p) s += (ta ? a(p, i) : a(i, p)) * (tb ? b(j, p) : b(p, j));
      out(i, j) = s;
    }
  return out;
}

void expect_mat_near(const Matrix& a, const Matrix& b) {
  ASSERT_EQ(a.rows(), b.rows());
  ASSERT_EQ(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.flat()[i], b.flat()[i], 1e-10);
}

}  // namespace

class MatmulBothIsas : public ::testing::TestWithParam<simd::Isa> {
 protected:
  void SetUp() override {
    if (!simd::select(GetParam())) GTEST_SKIP();
  }
  void TearDown() override { simd::select(simd::avx2_kernels() ? simd::Isa::avx2 : simd::Isa::scalar); }
};

TEST_P(MatmulBothIsas, ProductsMatchNaive) {
  std::mt19937_64 rng(6);
  for (auto [m, k, n] : {std::tuple{1, 1, 1}, {3, 5, 7}, {8, 16, 20}, {5, 33, 17}}) {
    Matrix a = random_mat(rng, m, k), b = random_mat(rng, k, n);
    Matrix out(2, 2, 9.0);
    ragcode::matmul(a, b, out);
    expect_mat_near(out, naive(a, b, false, false));

    Matrix at = random_mat(rng, k, m);
    Matrix acc = random_mat(rng, m, n);
    Matrix want = naive(at, b, true, false);
    for (std::size_t i = 0; i < want.size(); ++i) want.flat()[i] += acc.flat()[i];
    ragcode::matmul_at_b_acc(at, b, acc);
    expect_mat_near(acc, want);

    Matrix bt = random_mat(rng, n, k);
    Matrix out2(m, n, 5.0);
    ragcode::matmul_a_bt(a, bt, out2);
    expect_mat_near(out2, naive(a, bt, false, true));

    Matrix acc2 = random_mat(rng, m, n);
    Matrix want2 = naive(a, bt, false, true);
    for (std::size_t i = 0; i < want2.size(); ++i) want2.flat()[i] += acc2.flat()[i];
    ragcode::matmul_a_bt_acc(a, bt, acc2);
    expect_mat_near(acc2, want2);
  }
}

INSTANTIATE_TEST_SUITE_P(Isa, MatmulBothIsas, ::testing::Values(simd::Isa::scalar, simd::Isa::avx2),
                         [](const ::testing::TestParamInfo<simd::Isa>& info) {
                           return std::string(simd::isa_name(info.param));
                         });

TEST(Tensor, SoftmaxRowsWithWidth) {
  Matrix m(2, 3);
  m(0, 0) = 1000;
  m(0, 1) = 1000;
  m(0, 2) = 1000;
  m(1, 0) = 0;
  m(1, 1) = std::log(3.0);
  m(1, 2) = 42;
  const std::vector<std::size_t> width{3, 2};
  ragcode::softmax_rows(m, width);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(m(0, j), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(m(1, 0), 0.25, 1e-15);
  EXPECT_NEAR(m(1, 1), 0.75, 1e-15);
  EXPECT_EQ(m(1, 2), 0.0);
}

TEST(Tensor, BiasHelpers) {
  Matrix m(2, 2, 1.0);
  const std::vector<double> bias{1.0, -2.0};
  ragcode::add_row_bias(m, bias);
  EXPECT_EQ(m(1, 0), 2.0);
  EXPECT_EQ(m(1, 1), -1.0);
  std::vector<double> g(2, 0.5);
  ragcode::accumulate_column_sums(m, g);
  EXPECT_EQ(g[0], 4.5);
  EXPECT_EQ(g[1], -1.5);
}
