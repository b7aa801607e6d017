#include <random>

#include <gtest/gtest.h>

#include "oracle.hpp"
#include "wavegas/linalg.hpp"

using namespace wavegas;

namespace {

CsrMatrix random_csr(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double density) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<float> val(0.0f, 1.0f);
  std::vector<Triplet> t;
  for (index_t r = 0; r < rows; ++r)
    for (index_t c = 0; c < cols; ++c)
      if (u(rng) < density) t.push_back({r, c, val(rng)});
  return csr_from_triplets(rows, cols, std::move(t));
}

DenseMatrix random_dense(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<float> val(0.0f, 1.0f);
  DenseMatrix m(rows, cols);
  for (float& v : m.values()) v = val(rng);
  return m;
}

// Plain triple loop in double.
oracle::Mat reference_product(const DenseMatrix& a, const DenseMatrix& b) {
  return oracle::matmul(oracle::from(a), oracle::from(b));
}

void expect_near(const DenseMatrix& got, const oracle::Mat& want, double tol) {
  ASSERT_EQ(got.rows(), want.size());
  for (std::size_t i = 0; i < got.rows(); ++i)
    for (std::size_t j = 0; j < got.cols(); ++j) EXPECT_NEAR(got(i, j), want[i][j], tol) << i << "," << j;
}

}  // namespace

TEST(Spmm, IdentityReturnsInput) {
  const auto eye = csr_from_triplets(2, 2, {{0, 0, 1.0f}, {1, 1, 1.0f}});
  const auto b = DenseMatrix::from_rows({{1.5f, -2.0f, 3.0f}, {4.0f, 5.0f, -6.25f}});
  EXPECT_EQ(spmm(eye, b), b);
}

TEST(Spmm, HalfMatrixTimesIdentity) {
  const auto a = csr_from_triplets(2, 2, {{0, 0, 0.5f}, {0, 1, 0.5f}, {1, 0, 0.5f}, {1, 1, 0.5f}});
  const auto b = DenseMatrix::from_rows({{1, 0}, {0, 1}});
  EXPECT_EQ(spmm(a, b), DenseMatrix::from_rows({{0.5f, 0.5f}, {0.5f, 0.5f}}));
}

TEST(Spmm, MatchesDensifiedProduct5x5) {
  std::mt19937_64 rng(7);
  const auto a = random_csr(rng, 5, 5, 0.4);
  const auto b = random_dense(rng, 5, 3);
  expect_near(spmm(a, b), reference_product(densify(a), b), 1e-6);
}

TEST(Spmm, MatchesDensifiedProductRandomized) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> dim(1, 32);
  std::uniform_real_distribution<double> dens(0.0, 0.6);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = dim(rng), k = dim(rng), m = dim(rng);
    const auto a = random_csr(rng, n, k, dens(rng));
    const auto b = random_dense(rng, k, m);
    a.validate();
    const auto got = spmm(a, b);
    const auto want = reference_product(densify(a), b);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j)
        ASSERT_NEAR(got(i, j), want[i][j], 1e-6 * std::max(1.0, std::abs(want[i][j])));
  }
}

TEST(Spmm, DimensionMismatchThrows) {
  const auto a = csr_from_triplets(2, 3, {});
  EXPECT_THROW(spmm(a, DenseMatrix(2, 2)), ConfigError);
}

TEST(SpmmRows, AllRowsEqualsSpmm) {
  std::mt19937_64 rng(3);
  const auto a = random_csr(rng, 6, 4, 0.5);
  const auto b = random_dense(rng, 4, 3);
  const std::vector<index_t> all{0, 1, 2, 3, 4, 5};
  EXPECT_EQ(spmm_rows(a, b, all), spmm(a, b));
}

TEST(SpmmRows, EmptySelection) {
  const auto a = csr_from_triplets(3, 3, {{0, 0, 1.0f}});
  const auto out = spmm_rows(a, DenseMatrix(3, 4), {});
  EXPECT_EQ(out.rows(), 0u);
  EXPECT_EQ(out.cols(), 4u);
}

TEST(SpmmRows, SingleRowOfDensifiedProduct) {
  std::mt19937_64 rng(7);
  const auto a = random_csr(rng, 5, 5, 0.4);
  const auto b = random_dense(rng, 5, 3);
  const std::vector<index_t> rows{2};
  const auto got = spmm_rows(a, b, rows);
  const auto want = reference_product(densify(a), b);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(got(0, j), want[2][j], 1e-6);
}

TEST(SpmmRows, RandomSubsetsAreRowSelections) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_csr(rng, 20, 15, 0.3);
    const auto b = random_dense(rng, 15, 4);
    std::vector<index_t> rows;
    for (index_t r = 0; r < 20; ++r)
      if (rng() % 3 == 0) rows.push_back(r);
    std::shuffle(rows.begin(), rows.end(), rng);
    EXPECT_EQ(spmm_rows(a, b, rows), select_rows(spmm(a, b), rows));
  }
}

TEST(SpmmRows, OutOfRangeThrows) {
  const auto a = csr_from_triplets(2, 2, {});
  const std::vector<index_t> rows{2};
  EXPECT_THROW(spmm_rows(a, DenseMatrix(2, 1), rows), ConfigError);
}

TEST(SpmmTransposed, MatchesDenseTranspose) {
  std::mt19937_64 rng(9);
  const auto a = random_csr(rng, 7, 5, 0.4);
  const auto b = random_dense(rng, 7, 3);
  const auto d = oracle::from(densify(a));
  oracle::Mat at = oracle::zeros(5, 7);
  for (std::size_t i = 0; i < 7; ++i)
    for (std::size_t j = 0; j < 5; ++j) at[j][i] = d[i][j];
  expect_near(spmm_transposed(a, b), oracle::matmul(at, oracle::from(b)), 1e-6);
}

TEST(DenseOps, HandMultiplication3x2By2x3) {
  const auto a = DenseMatrix::from_rows({{1, 2}, {3, 4}, {5, 6}});
  const auto b = DenseMatrix::from_rows({{7, 8, 9}, {10, 11, 12}});
  // row 0: [1*7+2*10, 1*8+2*11, 1*9+2*12]
  const auto want = DenseMatrix::from_rows({{27, 30, 33}, {61, 68, 75}, {95, 106, 117}});
  EXPECT_EQ(matmul(a, b), want);
  EXPECT_EQ(matmul_tn(DenseMatrix::from_rows({{1, 3, 5}, {2, 4, 6}}), b), want);
  EXPECT_EQ(matmul_nt(a, DenseMatrix::from_rows({{7, 10}, {8, 11}, {9, 12}})), want);
}

TEST(DenseOps, MatmulMismatchThrows) {
  EXPECT_THROW(matmul(DenseMatrix(2, 3), DenseMatrix(2, 3)), ConfigError);
  EXPECT_THROW(matmul_tn(DenseMatrix(2, 3), DenseMatrix(3, 3)), ConfigError);
  EXPECT_THROW(matmul_nt(DenseMatrix(2, 3), DenseMatrix(2, 2)), ConfigError);
  EXPECT_THROW(add_row_vector(DenseMatrix(2, 3), DenseMatrix(1, 2)), ConfigError);
}

TEST(DenseOps, Relu) {
  EXPECT_EQ(relu(DenseMatrix::from_rows({{-1, 2}})), DenseMatrix::from_rows({{0, 2}}));
  const auto grad = DenseMatrix::from_rows({{5, 7, 9}});
  const auto pre = DenseMatrix::from_rows({{-1, 0, 3}});
  EXPECT_EQ(relu_backward(grad, pre), DenseMatrix::from_rows({{0, 0, 9}}));
}

TEST(DenseOps, SoftmaxConstantRowIsUniform) {
  const auto s = softmax_rows(DenseMatrix::from_rows({{3, 3, 3, 3}}));
  for (std::size_t j = 0; j < 4; ++j) EXPECT_FLOAT_EQ(s(0, j), 0.25f);
}

TEST(DenseOps, SoftmaxRowsSumToOneAndShiftInvariant) {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> shift(0.0f, 20.0f);
  for (int trial = 0; trial < 50; ++trial) {
    auto m = random_dense(rng, 6, 1 + trial % 9);
    for (float& v : m.values()) v *= 5.0f;
    const auto s = softmax_rows(m);
    auto shifted = m;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const float c = shift(rng);
      for (float& v : shifted.row(i)) v += c;
    }
    const auto s2 = softmax_rows(shifted);
    for (std::size_t i = 0; i < m.rows(); ++i) {
      double sum = 0.0;
      for (float v : s.row(i)) sum += v;
      EXPECT_NEAR(sum, 1.0, 1e-6);
      for (std::size_t j = 0; j < m.cols(); ++j) EXPECT_NEAR(s(i, j), s2(i, j), 1e-5);
    }
  }
}

TEST(DenseOps, BiasAndColumnSums) {
  const auto a = DenseMatrix::from_rows({{1, 2}, {3, 4}});
  EXPECT_EQ(add_row_vector(a, DenseMatrix::from_rows({{10, 20}})),
            DenseMatrix::from_rows({{11, 22}, {13, 24}}));
  EXPECT_EQ(column_sums(a), DenseMatrix::from_rows({{4, 6}}));
}

TEST(Csr, ValidateCatchesBrokenInvariants) {
  auto m = csr_from_triplets(2, 2, {{0, 1, 1.0f}, {0, 0, 2.0f}, {1, 1, 3.0f}});
  EXPECT_NO_THROW(m.validate());
  EXPECT_EQ(m.col_idx[0], 0u);  // sorted on construction
  auto bad = m;
  std::swap(bad.col_idx[0], bad.col_idx[1]);
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = m;
  bad.col_idx[2] = 5;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = m;
  bad.row_ptr.back() = 2;
  EXPECT_THROW(bad.validate(), ConfigError);
}
