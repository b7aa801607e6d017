#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "wavegas/error.hpp"

namespace wavegas {

using index_t = std::uint32_t;

// Row-major float32 matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, float fill = 0.0f)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<float> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    detail::require(data_.size() == rows_ * cols_, "DenseMatrix: data length ",
                    data_.size(), " != ", rows_, "x", cols_);
  }

  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<float>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    DenseMatrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
      detail::require(row.size() == c, "DenseMatrix::from_rows: ragged rows");
      std::copy(row.begin(), row.end(), m.row(i++).begin());
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const float> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }
  const std::vector<float>& storage() const { return data_; }

  std::size_t bytes() const { return data_.size() * sizeof(float); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
  }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

// Compressed sparse row matrix; column indices sorted within each row.
struct CsrMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<index_t> col_idx;
  std::vector<float> values;

  std::size_t nnz() const { return col_idx.size(); }

  std::size_t row_begin(std::size_t r) const { return row_ptr[r]; }
  std::size_t row_end(std::size_t r) const { return row_ptr[r + 1]; }

  void validate() const {
    detail::require(row_ptr.size() == rows + 1, "CsrMatrix: row_ptr length ", row_ptr.size(),
                    " != rows+1 = ", rows + 1);
    detail::require(row_ptr.front() == 0, "CsrMatrix: row_ptr[0] != 0");
    detail::require(row_ptr.back() == col_idx.size() && col_idx.size() == values.size(),
                    "CsrMatrix: nnz mismatch");
    for (std::size_t r = 0; r < rows; ++r) {
      detail::require(row_ptr[r] <= row_ptr[r + 1], "CsrMatrix: row_ptr decreases at row ", r);
      for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
        detail::require(col_idx[k] < cols, "CsrMatrix: column ", col_idx[k], " out of range");
        detail::require(k == row_ptr[r] || col_idx[k - 1] < col_idx[k],
                        "CsrMatrix: columns not strictly sorted in row ", r);
      }
    }
  }

  friend bool operator==(const CsrMatrix&, const CsrMatrix&) = default;
};

// Builds a CSR matrix from (row, col, value) triplets; duplicates are summed.
struct Triplet {
  index_t row;
  index_t col;
  float value;
};

inline CsrMatrix csr_from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> t) {
  std::sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  CsrMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.row_ptr.assign(rows + 1, 0);
  for (std::size_t i = 0; i < t.size(); ++i) {
    detail::require(t[i].row < rows && t[i].col < cols, "csr_from_triplets: entry (", t[i].row,
                    ",", t[i].col, ") outside ", rows, "x", cols);
    if (i > 0 && t[i].row == t[i - 1].row && t[i].col == t[i - 1].col) {
      m.values.back() += t[i].value;
      continue;
    }
    m.col_idx.push_back(t[i].col);
    m.values.push_back(t[i].value);
    ++m.row_ptr[t[i].row + 1];
  }
  for (std::size_t r = 0; r < rows; ++r) m.row_ptr[r + 1] += m.row_ptr[r];
  return m;
}

inline DenseMatrix densify(const CsrMatrix& a) {
  DenseMatrix d(a.rows, a.cols);
  for (std::size_t r = 0; r < a.rows; ++r)
    for (std::size_t k = a.row_begin(r); k < a.row_end(r); ++k) d(r, a.col_idx[k]) = a.values[k];
  return d;
}

namespace detail {

inline void store_row(std::span<const double> acc, std::span<float> out) {
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = static_cast<float>(acc[j]);
}

inline void spmm_row(const CsrMatrix& a, const DenseMatrix& b, std::size_t r,
                     std::vector<double>& acc, std::span<float> out) {
  std::fill(acc.begin(), acc.end(), 0.0);
  for (std::size_t k = a.row_begin(r); k < a.row_end(r); ++k) {
    const double w = a.values[k];
    const auto src = b.row(a.col_idx[k]);
    for (std::size_t j = 0; j < src.size(); ++j) acc[j] += w * src[j];
  }
  store_row(acc, out);
}

}  // namespace detail

inline DenseMatrix spmm(const CsrMatrix& a, const DenseMatrix& b) {
  detail::require(a.cols == b.rows(), "spmm: a.cols ", a.cols, " != b.rows ", b.rows());
  DenseMatrix out(a.rows, b.cols());
  std::vector<double> acc(b.cols());
  for (std::size_t r = 0; r < a.rows; ++r) detail::spmm_row(a, b, r, acc, out.row(r));
  return out;
}

inline DenseMatrix spmm_rows(const CsrMatrix& a, const DenseMatrix& b, std::span<const index_t> rows) {
  detail::require(a.cols == b.rows(), "spmm_rows: a.cols ", a.cols, " != b.rows ", b.rows());
  DenseMatrix out(rows.size(), b.cols());
  std::vector<double> acc(b.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    detail::require(rows[i] < a.rows, "spmm_rows: row ", rows[i], " out of range ", a.rows);
    detail::spmm_row(a, b, rows[i], acc, out.row(i));
  }
  return out;
}

// aᵀ·b without materializing the transpose.
inline DenseMatrix spmm_transposed(const CsrMatrix& a, const DenseMatrix& b) {
  detail::require(a.rows == b.rows(), "spmm_transposed: a.rows ", a.rows, " != b.rows ", b.rows());
  const std::size_t m = b.cols();
  std::vector<double> acc(a.cols * m, 0.0);
  for (std::size_t r = 0; r < a.rows; ++r) {
    const auto src = b.row(r);
    for (std::size_t k = a.row_begin(r); k < a.row_end(r); ++k) {
      const double w = a.values[k];
      double* dst = acc.data() + a.col_idx[k] * m;
      for (std::size_t j = 0; j < m; ++j) dst[j] += w * src[j];
    }
  }
  DenseMatrix out(a.cols, m);
  for (std::size_t i = 0; i < acc.size(); ++i) out.values()[i] = static_cast<float>(acc[i]);
  return out;
}

// a·b. Zero entries of a are skipped, which makes sparse feature matrices cheap.
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  detail::require(a.cols() == b.rows(), "matmul: ", a.rows(), "x", a.cols(), " * ", b.rows(), "x",
                  b.cols());
  DenseMatrix out(a.rows(), b.cols());
  std::vector<double> acc(b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    const auto ar = a.row(i);
    for (std::size_t k = 0; k < ar.size(); ++k) {
      if (ar[k] == 0.0f) continue;
      const double w = ar[k];
      const auto br = b.row(k);
      for (std::size_t j = 0; j < br.size(); ++j) acc[j] += w * br[j];
    }
    detail::store_row(acc, out.row(i));
  }
  return out;
}

// aᵀ·b.
inline DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  detail::require(a.rows() == b.rows(), "matmul_tn: ", a.rows(), "x", a.cols(), "^T * ", b.rows(),
                  "x", b.cols());
  const std::size_t m = b.cols();
  std::vector<double> acc(a.cols() * m, 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ar = a.row(i);
    const auto br = b.row(i);
    for (std::size_t k = 0; k < ar.size(); ++k) {
      if (ar[k] == 0.0f) continue;
      const double w = ar[k];
      double* dst = acc.data() + k * m;
      for (std::size_t j = 0; j < m; ++j) dst[j] += w * br[j];
    }
  }
  DenseMatrix out(a.cols(), m);
  for (std::size_t i = 0; i < acc.size(); ++i) out.values()[i] = static_cast<float>(acc[i]);
  return out;
}

// a·bᵀ.
inline DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  detail::require(a.cols() == b.cols(), "matmul_nt: ", a.rows(), "x", a.cols(), " * (", b.rows(),
                  "x", b.cols(), ")^T");
  DenseMatrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ar = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const auto br = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < ar.size(); ++k) s += static_cast<double>(ar[k]) * br[k];
      out(i, j) = static_cast<float>(s);
    }
  }
  return out;
}

// a + bias broadcast over rows; bias is 1×cols.
inline DenseMatrix add_row_vector(const DenseMatrix& a, const DenseMatrix& bias) {
  detail::require(bias.rows() == 1 && bias.cols() == a.cols(), "add_row_vector: bias ", bias.rows(),
                  "x", bias.cols(), " vs ", a.cols(), " columns");
  DenseMatrix out = a;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias(0, j);
  }
  return out;
}

inline DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  DenseMatrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] += b.values()[i];
  return out;
}

inline DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard: shape mismatch");
  DenseMatrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] *= b.values()[i];
  return out;
}

inline DenseMatrix relu(const DenseMatrix& a) {
  DenseMatrix out = a;
  for (float& v : out.values()) v = v > 0.0f ? v : 0.0f;
  return out;
}

// Passes grad through where the pre-activation was positive.
inline DenseMatrix relu_backward(const DenseMatrix& grad, const DenseMatrix& pre) {
  detail::require(grad.rows() == pre.rows() && grad.cols() == pre.cols(),
                  "relu_backward: shape mismatch");
  DenseMatrix out = grad;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!(pre.values()[i] > 0.0f)) out.values()[i] = 0.0f;
  return out;
}

inline DenseMatrix softmax_rows(const DenseMatrix& a) {
  DenseMatrix out(a.rows(), a.cols());
  std::vector<double> e(a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    if (r.empty()) continue;
    const float mx = *std::max_element(r.begin(), r.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) sum += e[j] = std::exp(static_cast<double>(r[j]) - mx);
    auto o = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) o[j] = static_cast<float>(e[j] / sum);
  }
  return out;
}

// 1×cols vector of column sums.
inline DenseMatrix column_sums(const DenseMatrix& a) {
  std::vector<double> acc(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) acc[j] += r[j];
  }
  DenseMatrix out(1, a.cols());
  detail::store_row(acc, out.row(0));
  return out;
}

inline DenseMatrix select_rows(const DenseMatrix& a, std::span<const index_t> rows) {
  DenseMatrix out(rows.size(), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    detail::require(rows[i] < a.rows(), "select_rows: row ", rows[i], " out of range ", a.rows());
    std::copy_n(a.row(rows[i]).begin(), a.cols(), out.row(i).begin());
  }
  return out;
}

// Rows of a followed by rows of b.
inline DenseMatrix vstack(const DenseMatrix& a, const DenseMatrix& b) {
  detail::require(a.cols() == b.cols() || a.rows() == 0 || b.rows() == 0,
                  "vstack: column mismatch ", a.cols(), " vs ", b.cols());
  const std::size_t cols = a.rows() ? a.cols() : b.cols();
  std::vector<float> data;
  data.reserve((a.rows() + b.rows()) * cols);
  data.insert(data.end(), a.values().begin(), a.values().end());
  data.insert(data.end(), b.values().begin(), b.values().end());
  return DenseMatrix(a.rows() + b.rows(), cols, std::move(data));
}

inline float max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(), "max_abs_diff: shape mismatch");
  float m = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

}  // namespace wavegas
