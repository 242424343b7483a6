#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace epine {

using Index = std::int32_t;
using Offset = std::int64_t;

struct Triplet {
  Index row;
  Index col;
  double value;
};

/// Read-only view of one compressed row.
struct RowView {
  std::span<const Index> cols;
  std::span<const double> values;

  std::size_t size() const noexcept { return cols.size(); }
  bool empty() const noexcept { return cols.empty(); }
};

/// Compressed row-major matrix of strictly positive reals.
///
/// Structural zeros are never stored and column indices inside a row are
/// strictly increasing. Every constructor enforces both properties, so any
/// instance that exists satisfies them.
class SparseMatrix {
 public:
  SparseMatrix() = default;

  /// All-zero matrix of the given shape.
  SparseMatrix(Index rows, Index cols);

  /// Takes ownership of CSR arrays; throws ValidationError if they are not
  /// well formed.
  SparseMatrix(Index rows, Index cols, std::vector<Offset> row_ptr,
               std::vector<Index> col_idx, std::vector<double> values);

  static SparseMatrix identity(Index n);

  /// Duplicate coordinates are summed. Zero values are dropped; negative or
  /// non-finite values and out-of-range coordinates throw ValidationError.
  static SparseMatrix from_triplets(Index rows, Index cols,
                                    std::vector<Triplet> triplets);

  Index rows() const noexcept { return rows_; }
  Index cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  RowView row(Index i) const;
  std::span<const Offset> row_ptr() const noexcept { return row_ptr_; }
  std::span<const Index> col_indices() const noexcept { return col_idx_; }
  std::span<const double> values() const noexcept { return values_; }

  /// Stored value at (i, j), or 0 when the position is structurally empty.
  double at(Index i, Index j) const;
  bool contains(Index i, Index j) const;

  bool same_pattern(const SparseMatrix& other) const noexcept;
  bool is_symmetric() const;
  std::vector<double> row_sums() const;
  /// Largest stored value; 0 for an empty matrix.
  double max_value() const noexcept;

  /// Same pattern, new values (must be positive and finite).
  SparseMatrix with_values(std::vector<double> values) const;
  SparseMatrix scaled(double factor) const;
  SparseMatrix transposed() const;
  std::vector<Triplet> to_triplets() const;

  friend bool operator==(const SparseMatrix& a, const SparseMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ &&
           a.row_ptr_ == b.row_ptr_ && a.col_idx_ == b.col_idx_ &&
           a.values_ == b.values_;
  }

 private:
  void validate() const;

  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Offset> row_ptr_ = {0};
  std::vector<Index> col_idx_;
  std::vector<double> values_;
};

/// Entry-wise a + scale * b over the union of both patterns.
SparseMatrix add(const SparseMatrix& a, const SparseMatrix& b,
                 double scale = 1.0);

}  // namespace epine
