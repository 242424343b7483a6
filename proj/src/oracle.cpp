#include "epine/oracle.hpp"

#include <algorithm>
#include <queue>

#include "epine/error.hpp"

namespace epine {

std::int32_t DistanceMatrix::diameter() const noexcept {
  std::int32_t best = 0;
  for (std::int32_t d : dist_) {
    if (d != kUnreachable) best = std::max(best, d);
  }
  return best;
}

DistanceMatrix bfs_distance_oracle(const Graph& graph) {
  const SparseMatrix& a = graph.adjacency();
  const Index n = a.rows();
  DistanceMatrix dist(n);
  std::queue<Index> frontier;
  for (Index s = 0; s < n; ++s) {
    dist(s, s) = 0;
    frontier.push(s);
    while (!frontier.empty()) {
      const Index u = frontier.front();
      frontier.pop();
      for (Index v : a.row(u).cols) {
        if (dist(s, v) == DistanceMatrix::kUnreachable) {
          dist(s, v) = dist(s, u) + 1;
          frontier.push(v);
        }
      }
    }
  }
  return dist;
}

namespace {

struct PathSearch {
  const SparseMatrix& adj;
  Index target;
  int length;
  MatmulMode cost;
  std::uint64_t budget;
  std::uint64_t steps = 0;
  std::vector<char> on_path;
  double total = 0.0;

  void extend(Index u, int depth, double acc) {
    if (depth == length) {
      if (u == target) total += acc;
      return;
    }
    const RowView r = adj.row(u);
    for (std::size_t p = 0; p < r.size(); ++p) {
      const Index v = r.cols[p];
      if (on_path[v]) continue;
      if (++steps > budget) {
        throw OracleOverflow("shortest-path oracle exceeded its budget of " +
                             std::to_string(budget) + " extensions");
      }
      const double w = r.values[p];
      on_path[v] = 1;
      extend(v, depth + 1, cost == MatmulMode::additive ? acc + w : acc * w);
      on_path[v] = 0;
    }
  }
};

}  // namespace

double shortest_path_sum_oracle(const Graph& graph, Index i, Index j, int k,
                                MatmulMode cost,
                                const PathOracleOptions& options) {
  const SparseMatrix& a = graph.adjacency();
  if (i < 0 || j < 0 || i >= a.rows() || j >= a.rows()) {
    throw ValidationError("shortest_path_sum_oracle: node out of range");
  }
  if (k < 1) return 0.0;

  // Hop distance from i by a plain BFS; only k-hop pairs have k-hop
  // shortest paths.
  std::vector<std::int32_t> dist(static_cast<std::size_t>(a.rows()),
                                 DistanceMatrix::kUnreachable);
  std::queue<Index> frontier;
  dist[i] = 0;
  frontier.push(i);
  while (!frontier.empty()) {
    const Index u = frontier.front();
    frontier.pop();
    for (Index v : a.row(u).cols) {
      if (dist[v] == DistanceMatrix::kUnreachable) {
        dist[v] = dist[u] + 1;
        frontier.push(v);
      }
    }
  }
  if (dist[j] != k) return 0.0;

  // Every simple i -> j path with k edges is a shortest path here.
  PathSearch search{a, j, k, cost, options.budget, 0,
                    std::vector<char>(static_cast<std::size_t>(a.rows()), 0),
                    0.0};
  search.on_path[i] = 1;
  search.extend(i, 0, cost == MatmulMode::additive ? 0.0 : 1.0);
  return search.total;
}

}  // namespace epine
