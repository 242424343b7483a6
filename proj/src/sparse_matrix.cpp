#include "epine/sparse_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "epine/error.hpp"

namespace epine {

SparseMatrix::SparseMatrix(Index rows, Index cols)
    : rows_(rows), cols_(cols), row_ptr_(static_cast<std::size_t>(rows) + 1, 0) {
  if (rows < 0 || cols < 0) {
    throw ValidationError("sparse matrix: negative shape");
  }
}

SparseMatrix::SparseMatrix(Index rows, Index cols, std::vector<Offset> row_ptr,
                           std::vector<Index> col_idx,
                           std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      row_ptr_(std::move(row_ptr)),
      col_idx_(std::move(col_idx)),
      values_(std::move(values)) {
  validate();
}

void SparseMatrix::validate() const {
  if (rows_ < 0 || cols_ < 0) {
    throw ValidationError("sparse matrix: negative shape");
  }
  if (row_ptr_.size() != static_cast<std::size_t>(rows_) + 1 ||
      row_ptr_.front() != 0 ||
      row_ptr_.back() != static_cast<Offset>(col_idx_.size()) ||
      col_idx_.size() != values_.size()) {
    throw ValidationError("sparse matrix: inconsistent CSR array sizes");
  }
  for (Index i = 0; i < rows_; ++i) {
    const Offset begin = row_ptr_[i];
    const Offset end = row_ptr_[i + 1];
    if (end < begin) {
      throw ValidationError("sparse matrix: row offsets decrease at row " +
                            std::to_string(i));
    }
    for (Offset p = begin; p < end; ++p) {
      const Index c = col_idx_[p];
      if (c < 0 || c >= cols_) {
        throw ValidationError("sparse matrix: column out of range in row " +
                              std::to_string(i));
      }
      if (p > begin && col_idx_[p - 1] >= c) {
        throw ValidationError(
            "sparse matrix: columns not strictly increasing in row " +
            std::to_string(i));
      }
      if (!(values_[p] > 0.0) || !std::isfinite(values_[p])) {
        throw ValidationError("sparse matrix: non-positive value at (" +
                              std::to_string(i) + ", " + std::to_string(c) +
                              ")");
      }
    }
  }
}

SparseMatrix SparseMatrix::identity(Index n) {
  std::vector<Offset> ptr(static_cast<std::size_t>(n) + 1);
  std::vector<Index> idx(n);
  for (Index i = 0; i <= n; ++i) ptr[i] = i;
  for (Index i = 0; i < n; ++i) idx[i] = i;
  return SparseMatrix(n, n, std::move(ptr), std::move(idx),
                      std::vector<double>(n, 1.0));
}

SparseMatrix SparseMatrix::from_triplets(Index rows, Index cols,
                                         std::vector<Triplet> triplets) {
  for (const Triplet& t : triplets) {
    if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols) {
      throw ValidationError("triplet (" + std::to_string(t.row) + ", " +
                            std::to_string(t.col) + ") outside matrix shape");
    }
    if (t.value < 0.0 || !std::isfinite(t.value)) {
      throw ValidationError("triplet (" + std::to_string(t.row) + ", " +
                            std::to_string(t.col) +
                            ") has a negative or non-finite value");
    }
  }
  std::stable_sort(triplets.begin(), triplets.end(),
                   [](const Triplet& a, const Triplet& b) {
                     return a.row != b.row ? a.row < b.row : a.col < b.col;
                   });

  std::vector<Offset> ptr(static_cast<std::size_t>(rows) + 1, 0);
  std::vector<Index> idx;
  std::vector<double> val;
  idx.reserve(triplets.size());
  val.reserve(triplets.size());
  std::size_t k = 0;
  for (Index i = 0; i < rows; ++i) {
    while (k < triplets.size() && triplets[k].row == i) {
      const Index c = triplets[k].col;
      double sum = 0.0;
      while (k < triplets.size() && triplets[k].row == i &&
             triplets[k].col == c) {
        sum += triplets[k].value;
        ++k;
      }
      if (sum > 0.0) {
        idx.push_back(c);
        val.push_back(sum);
      }
    }
    ptr[i + 1] = static_cast<Offset>(idx.size());
  }
  return SparseMatrix(rows, cols, std::move(ptr), std::move(idx),
                      std::move(val));
}

RowView SparseMatrix::row(Index i) const {
  const auto begin = static_cast<std::size_t>(row_ptr_[i]);
  const auto len = static_cast<std::size_t>(row_ptr_[i + 1] - row_ptr_[i]);
  return {std::span<const Index>(col_idx_).subspan(begin, len),
          std::span<const double>(values_).subspan(begin, len)};
}

double SparseMatrix::at(Index i, Index j) const {
  const RowView r = row(i);
  const auto it = std::lower_bound(r.cols.begin(), r.cols.end(), j);
  if (it == r.cols.end() || *it != j) return 0.0;
  return r.values[static_cast<std::size_t>(it - r.cols.begin())];
}

bool SparseMatrix::contains(Index i, Index j) const {
  const RowView r = row(i);
  return std::binary_search(r.cols.begin(), r.cols.end(), j);
}

bool SparseMatrix::same_pattern(const SparseMatrix& other) const noexcept {
  return rows_ == other.rows_ && cols_ == other.cols_ &&
         row_ptr_ == other.row_ptr_ && col_idx_ == other.col_idx_;
}

bool SparseMatrix::is_symmetric() const {
  if (rows_ != cols_) return false;
  for (Index i = 0; i < rows_; ++i) {
    const RowView r = row(i);
    for (std::size_t p = 0; p < r.size(); ++p) {
      if (at(r.cols[p], i) != r.values[p]) return false;
    }
  }
  return true;
}

std::vector<double> SparseMatrix::row_sums() const {
  std::vector<double> sums(static_cast<std::size_t>(rows_), 0.0);
  for (Index i = 0; i < rows_; ++i) {
    for (double v : row(i).values) sums[i] += v;
  }
  return sums;
}

double SparseMatrix::max_value() const noexcept {
  double m = 0.0;
  for (double v : values_) m = std::max(m, v);
  return m;
}

SparseMatrix SparseMatrix::with_values(std::vector<double> values) const {
  return SparseMatrix(rows_, cols_, row_ptr_, col_idx_, std::move(values));
}

SparseMatrix SparseMatrix::scaled(double factor) const {
  if (!(factor > 0.0)) {
    throw ValidationError("sparse matrix: scale factor must be positive");
  }
  std::vector<double> v(values_);
  for (double& x : v) x *= factor;
  return with_values(std::move(v));
}

SparseMatrix SparseMatrix::transposed() const {
  std::vector<Offset> ptr(static_cast<std::size_t>(cols_) + 1, 0);
  for (Index c : col_idx_) ++ptr[c + 1];
  for (Index c = 0; c < cols_; ++c) ptr[c + 1] += ptr[c];
  std::vector<Index> idx(col_idx_.size());
  std::vector<double> val(values_.size());
  std::vector<Offset> next(ptr.begin(), ptr.end() - 1);
  // Rows are visited in increasing order, so each output row is sorted.
  for (Index i = 0; i < rows_; ++i) {
    for (Offset p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
      const Offset q = next[col_idx_[p]]++;
      idx[q] = i;
      val[q] = values_[p];
    }
  }
  return SparseMatrix(cols_, rows_, std::move(ptr), std::move(idx),
                      std::move(val));
}

std::vector<Triplet> SparseMatrix::to_triplets() const {
  std::vector<Triplet> out;
  out.reserve(nnz());
  for (Index i = 0; i < rows_; ++i) {
    for (Offset p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
      out.push_back({i, col_idx_[p], values_[p]});
    }
  }
  return out;
}

SparseMatrix add(const SparseMatrix& a, const SparseMatrix& b, double scale) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ValidationError("add: shape mismatch");
  }
  if (scale < 0.0 || !std::isfinite(scale)) {
    throw ValidationError("add: scale must be non-negative and finite");
  }
  std::vector<Offset> ptr(static_cast<std::size_t>(a.rows()) + 1, 0);
  std::vector<Index> idx;
  std::vector<double> val;
  idx.reserve(a.nnz() + b.nnz());
  val.reserve(a.nnz() + b.nnz());
  for (Index i = 0; i < a.rows(); ++i) {
    const RowView ra = a.row(i);
    const RowView rb = b.row(i);
    std::size_t p = 0;
    std::size_t q = 0;
    while (p < ra.size() || q < rb.size()) {
      Index c;
      double v = 0.0;
      if (q == rb.size() || (p < ra.size() && ra.cols[p] < rb.cols[q])) {
        c = ra.cols[p];
        v = ra.values[p++];
      } else if (p == ra.size() || rb.cols[q] < ra.cols[p]) {
        c = rb.cols[q];
        v = scale * rb.values[q++];
      } else {
        c = ra.cols[p];
        v = ra.values[p++] + scale * rb.values[q++];
      }
      if (v > 0.0) {
        idx.push_back(c);
        val.push_back(v);
      }
    }
    ptr[i + 1] = static_cast<Offset>(idx.size());
  }
  return SparseMatrix(a.rows(), a.cols(), std::move(ptr), std::move(idx),
                      std::move(val));
}

}  // namespace epine
