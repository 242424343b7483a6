#pragma once

#include <vector>

#include "epine/graph.hpp"
#include "epine/modes.hpp"
#include "epine/sparse_matrix.hpp"

namespace epine {

/// Forbidden positions for the next order: the union of the supports of the
/// two preceding orders. Values are irrelevant and stored as 1.
class MaskMatrix {
 public:
  MaskMatrix() = default;
  explicit MaskMatrix(SparseMatrix forbidden) : forbidden_(std::move(forbidden)) {}

  const SparseMatrix& forbidden() const noexcept { return forbidden_; }
  Index rows() const noexcept { return forbidden_.rows(); }
  Index cols() const noexcept { return forbidden_.cols(); }
  bool forbids(Index i, Index j) const { return forbidden_.contains(i, j); }

 private:
  SparseMatrix forbidden_;
};

struct ProductOptions {
  /// Entries with value <= drop_tolerance are not stored. 0 keeps every
  /// nonzero product.
  double drop_tolerance = 0.0;
  /// Worker threads for row-parallel products; <= 0 uses the runtime default.
  int workers = 1;
};

/// Ordinary sparse product X * Y.
SparseMatrix multiply(const SparseMatrix& x, const SparseMatrix& y,
                      const ProductOptions& options = {});

/// Additive product: Z(i,j) = sum_t 1[X(i,t) * Y(t,j) != 0] * (X(i,t) + Y(t,j)).
SparseMatrix additive_product(const SparseMatrix& x, const SparseMatrix& y,
                              const ProductOptions& options = {});

/// Unmasked product under the chosen mode.
SparseMatrix product(const SparseMatrix& x, const SparseMatrix& y,
                     MatmulMode mode, const ProductOptions& options = {});

MaskMatrix build_mask(const SparseMatrix& last, const SparseMatrix& current);

/// Product of `current` and `adj` with every forbidden position and the
/// diagonal removed. Forbidden entries are never accumulated.
SparseMatrix masked_multiply(const SparseMatrix& current,
                             const SparseMatrix& adj, const MaskMatrix& mask,
                             MatmulMode mode,
                             const ProductOptions& options = {});

/// A^k by repeated ordinary products; k = 0 gives the identity.
SparseMatrix vanilla_power(const Graph& graph, int k,
                           const ProductOptions& options = {});

struct ProximityStack {
  /// matrices[i] holds order i + 1.
  std::vector<SparseMatrix> matrices;
  int requested_order = 1;
  int reached_order = 1;
  /// True when a product came out all-zero before the requested order.
  bool early_stopped = false;
  MatmulMode matmul_mode = MatmulMode::multiplicative;
  MaskMode mask_mode = MaskMode::rectified;

  const SparseMatrix& order(int k) const { return matrices.at(k - 1); }
};

/// Rectified proximity orders 1..k via the masked second-order recurrence:
/// each order is the product of the previous order with the adjacency,
/// masked by the supports of the two orders before it (order 0 being the
/// identity). Stops early when an order comes out empty. For undirected
/// graphs order k holds exactly the pairs at hop distance k.
ProximityStack rectified_stack(const Graph& graph, int k, MatmulMode mode,
                               const ProductOptions& options = {});

/// Unmasked orders: order k is the mode-product of order k-1 with the
/// adjacency. In multiplicative mode these are the plain powers A^k.
ProximityStack vanilla_stack(const Graph& graph, int k, MatmulMode mode,
                             const ProductOptions& options = {});

ProximityStack proximity_stack(const Graph& graph, int k, MatmulMode matmul,
                               MaskMode mask, const ProductOptions& options = {});

}  // namespace epine
