#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace giam {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Compressed-row matrix of doubles. Column indices are strictly increasing
/// within every row and no zeros are stored.
class SparseRowMatrix {
 public:
  SparseRowMatrix() = default;
  SparseRowMatrix(std::size_t rows, std::size_t cols);

  /// Duplicate coordinates are summed; zero results are dropped.
  static SparseRowMatrix from_triplets(std::size_t rows, std::size_t cols,
                                       std::vector<Triplet> triplets);
  static SparseRowMatrix identity(std::size_t n);
  static SparseRowMatrix from_dense(const Matrix& dense);

  /// Builds from per-row (col, value) lists that are already sorted and
  /// zero-free. Used by the row kernels.
  static SparseRowMatrix from_rows(std::size_t cols,
                                   std::vector<std::vector<std::size_t>> col_rows,
                                   std::vector<std::vector<double>> val_rows);

  std::size_t rows() const { return row_ptr_.size() - 1; }
  std::size_t cols() const { return cols_; }
  std::size_t nonzeros() const { return values_.size(); }

  std::span<const std::size_t> row_cols(std::size_t r) const {
    return {col_idx_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }
  std::span<const double> row_values(std::size_t r) const {
    return {values_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
  }

  /// Entry lookup by binary search within the row; zero when not stored.
  double at(std::size_t r, std::size_t c) const;

  double row_sum(std::size_t r) const;
  Vector row_sums() const;

  SparseRowMatrix transpose() const;
  Matrix to_dense() const;

  /// Keeps only entries whose column lies in [begin, end); shape unchanged.
  SparseRowMatrix column_range(std::size_t begin, std::size_t end) const;

  bool operator==(const SparseRowMatrix& other) const = default;

 private:
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
};

/// Row-by-row product a * b. Each output row is accumulated in the column
/// order of a's row, so results do not depend on evaluation order.
SparseRowMatrix sparse_product(const SparseRowMatrix& a, const SparseRowMatrix& b);

/// a * dense
Matrix multiply(const SparseRowMatrix& a, const Matrix& dense);

/// a^T * dense, without materializing the transpose.
Matrix multiply_transposed(const SparseRowMatrix& a, const Matrix& dense);

}  // namespace giam
