#include "giam/sparse_matrix.hpp"

#include <algorithm>
#include <string>

namespace giam {

SparseRowMatrix::SparseRowMatrix(std::size_t rows, std::size_t cols)
    : cols_(cols), row_ptr_(rows + 1, 0) {}

SparseRowMatrix SparseRowMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                               std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row >= rows || t.col >= cols) {
      throw std::out_of_range("triplet (" + std::to_string(t.row) + ", " +
                              std::to_string(t.col) + ") outside " +
                              std::to_string(rows) + "x" + std::to_string(cols));
    }
  }
  std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });

  SparseRowMatrix m(rows, cols);
  std::size_t i = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    while (i < triplets.size() && triplets[i].row == r) {
      const std::size_t c = triplets[i].col;
      double v = 0.0;
      while (i < triplets.size() && triplets[i].row == r && triplets[i].col == c) {
        v += triplets[i].value;
        ++i;
      }
      if (v != 0.0) {
        m.col_idx_.push_back(c);
        m.values_.push_back(v);
      }
    }
    m.row_ptr_[r + 1] = m.values_.size();
  }
  return m;
}

SparseRowMatrix SparseRowMatrix::identity(std::size_t n) {
  SparseRowMatrix m(n, n);
  m.col_idx_.resize(n);
  m.values_.assign(n, 1.0);
  for (std::size_t r = 0; r < n; ++r) {
    m.col_idx_[r] = r;
    m.row_ptr_[r + 1] = r + 1;
  }
  return m;
}

SparseRowMatrix SparseRowMatrix::from_dense(const Matrix& dense) {
  SparseRowMatrix m(static_cast<std::size_t>(dense.rows()), static_cast<std::size_t>(dense.cols()));
  for (Eigen::Index r = 0; r < dense.rows(); ++r) {
    for (Eigen::Index c = 0; c < dense.cols(); ++c) {
      if (dense(r, c) != 0.0) {
        m.col_idx_.push_back(static_cast<std::size_t>(c));
        m.values_.push_back(dense(r, c));
      }
    }
    m.row_ptr_[r + 1] = m.values_.size();
  }
  return m;
}

SparseRowMatrix SparseRowMatrix::from_rows(std::size_t cols,
                                           std::vector<std::vector<std::size_t>> col_rows,
                                           std::vector<std::vector<double>> val_rows) {
  SparseRowMatrix m(col_rows.size(), cols);
  std::size_t total = 0;
  for (const auto& row : col_rows) total += row.size();
  m.col_idx_.reserve(total);
  m.values_.reserve(total);
  for (std::size_t r = 0; r < col_rows.size(); ++r) {
    if (col_rows[r].size() != val_rows[r].size()) {
      throw std::invalid_argument("from_rows: column/value length mismatch in row " +
                                  std::to_string(r));
    }
    for (std::size_t j = 0; j < col_rows[r].size(); ++j) {
      if (col_rows[r][j] >= cols || (j > 0 && col_rows[r][j] <= col_rows[r][j - 1])) {
        throw std::invalid_argument("from_rows: unsorted or out-of-range column in row " +
                                    std::to_string(r));
      }
      if (val_rows[r][j] == 0.0) continue;
      m.col_idx_.push_back(col_rows[r][j]);
      m.values_.push_back(val_rows[r][j]);
    }
    m.row_ptr_[r + 1] = m.values_.size();
  }
  return m;
}

double SparseRowMatrix::at(std::size_t r, std::size_t c) const {
  const auto cs = row_cols(r);
  const auto it = std::lower_bound(cs.begin(), cs.end(), c);
  if (it == cs.end() || *it != c) return 0.0;
  return values_[row_ptr_[r] + static_cast<std::size_t>(it - cs.begin())];
}

double SparseRowMatrix::row_sum(std::size_t r) const {
  double s = 0.0;
  for (double v : row_values(r)) s += v;
  return s;
}

Vector SparseRowMatrix::row_sums() const {
  Vector s(static_cast<Eigen::Index>(rows()));
  for (std::size_t r = 0; r < rows(); ++r) s(static_cast<Eigen::Index>(r)) = row_sum(r);
  return s;
}

SparseRowMatrix SparseRowMatrix::transpose() const {
  SparseRowMatrix t(cols_, rows());
  std::vector<std::size_t> counts(cols_ + 1, 0);
  for (std::size_t c : col_idx_) ++counts[c + 1];
  for (std::size_t c = 0; c < cols_; ++c) counts[c + 1] += counts[c];
  t.row_ptr_ = counts;
  t.col_idx_.resize(values_.size());
  t.values_.resize(values_.size());
  std::vector<std::size_t> cursor(counts.begin(), counts.end() - 1);
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      const std::size_t dst = cursor[col_idx_[k]]++;
      t.col_idx_[dst] = r;
      t.values_[dst] = values_[k];
    }
  }
  return t;
}

Matrix SparseRowMatrix::to_dense() const {
  Matrix d = Matrix::Zero(static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols_));
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      d(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col_idx_[k])) = values_[k];
    }
  }
  return d;
}

SparseRowMatrix SparseRowMatrix::column_range(std::size_t begin, std::size_t end) const {
  SparseRowMatrix m(rows(), cols_);
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      if (col_idx_[k] >= begin && col_idx_[k] < end) {
        m.col_idx_.push_back(col_idx_[k]);
        m.values_.push_back(values_[k]);
      }
    }
    m.row_ptr_[r + 1] = m.values_.size();
  }
  return m;
}

SparseRowMatrix sparse_product(const SparseRowMatrix& a, const SparseRowMatrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("sparse_product: dimension mismatch " +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " * " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()));
  }
  const std::size_t n_out = b.cols();
  std::vector<double> acc(n_out, 0.0);
  std::vector<char> touched(n_out, 0);
  std::vector<std::size_t> pattern;

  std::vector<std::vector<std::size_t>> cols(a.rows());
  std::vector<std::vector<double>> vals(a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    pattern.clear();
    const auto a_cols = a.row_cols(r);
    const auto a_vals = a.row_values(r);
    for (std::size_t i = 0; i < a_cols.size(); ++i) {
      const auto b_cols = b.row_cols(a_cols[i]);
      const auto b_vals = b.row_values(a_cols[i]);
      for (std::size_t j = 0; j < b_cols.size(); ++j) {
        const std::size_t c = b_cols[j];
        if (!touched[c]) {
          touched[c] = 1;
          pattern.push_back(c);
        }
        acc[c] += a_vals[i] * b_vals[j];
      }
    }
    std::sort(pattern.begin(), pattern.end());
    cols[r].reserve(pattern.size());
    vals[r].reserve(pattern.size());
    for (std::size_t c : pattern) {
      if (acc[c] != 0.0) {
        cols[r].push_back(c);
        vals[r].push_back(acc[c]);
      }
      acc[c] = 0.0;
      touched[c] = 0;
    }
  }
  return SparseRowMatrix::from_rows(n_out, std::move(cols), std::move(vals));
}

Matrix multiply(const SparseRowMatrix& a, const Matrix& dense) {
  if (a.cols() != static_cast<std::size_t>(dense.rows())) {
    throw std::invalid_argument("multiply: dimension mismatch");
  }
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(a.rows()), dense.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto cs = a.row_cols(r);
    const auto vs = a.row_values(r);
    for (std::size_t k = 0; k < cs.size(); ++k) {
      out.row(static_cast<Eigen::Index>(r)) += vs[k] * dense.row(static_cast<Eigen::Index>(cs[k]));
    }
  }
  return out;
}

Matrix multiply_transposed(const SparseRowMatrix& a, const Matrix& dense) {
  if (a.rows() != static_cast<std::size_t>(dense.rows())) {
    throw std::invalid_argument("multiply_transposed: dimension mismatch");
  }
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(a.cols()), dense.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto cs = a.row_cols(r);
    const auto vs = a.row_values(r);
    for (std::size_t k = 0; k < cs.size(); ++k) {
      out.row(static_cast<Eigen::Index>(cs[k])) += vs[k] * dense.row(static_cast<Eigen::Index>(r));
    }
  }
  return out;
}

}  // namespace giam
