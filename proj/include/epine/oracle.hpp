#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "epine/graph.hpp"
#include "epine/modes.hpp"

namespace epine {

/// All-pairs hop distances, row-major n x n.
class DistanceMatrix {
 public:
  static constexpr std::int32_t kUnreachable =
      std::numeric_limits<std::int32_t>::max();

  DistanceMatrix() = default;
  explicit DistanceMatrix(Index n)
      : n_(n), dist_(static_cast<std::size_t>(n) * n, kUnreachable) {}

  Index size() const noexcept { return n_; }
  std::int32_t operator()(Index i, Index j) const {
    return dist_[static_cast<std::size_t>(i) * n_ + j];
  }
  std::int32_t& operator()(Index i, Index j) {
    return dist_[static_cast<std::size_t>(i) * n_ + j];
  }
  /// Largest finite distance; 0 for graphs without edges.
  std::int32_t diameter() const noexcept;

 private:
  Index n_ = 0;
  std::vector<std::int32_t> dist_;
};

/// Unweighted hop distances by one breadth-first search per source,
/// following out-edges.
DistanceMatrix bfs_distance_oracle(const Graph& graph);

struct PathOracleOptions {
  /// Maximum number of DFS extensions before OracleOverflow is thrown.
  std::uint64_t budget = 50'000'000;
};

/// Sum over every k-hop shortest path i -> j of the chain product
/// (multiplicative) or chain sum (additive) of its edge weights, found by
/// exhaustive simple-path enumeration. Zero when the hop distance is not k.
double shortest_path_sum_oracle(const Graph& graph, Index i, Index j, int k,
                                MatmulMode cost,
                                const PathOracleOptions& options = {});

}  // namespace epine
