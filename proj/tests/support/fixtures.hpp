#pragma once

// Small graph generators shared by the unit and acceptance suites.

#include <algorithm>
#include <cstdint>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "epine/graph.hpp"
#include "epine/sparse_matrix.hpp"

namespace epine::testing {

using EdgePairs = std::vector<std::pair<Index, Index>>;

inline Graph undirected_graph(Index n, const EdgePairs& edges,
                              const std::vector<double>& weights = {}) {
  std::vector<Triplet> t;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double w = weights.empty() ? 1.0 : weights[e];
    t.push_back({edges[e].first, edges[e].second, w});
    t.push_back({edges[e].second, edges[e].first, w});
  }
  return Graph(SparseMatrix::from_triplets(n, n, std::move(t)), false,
               !weights.empty());
}

inline Graph directed_graph(Index n, const EdgePairs& edges) {
  std::vector<Triplet> t;
  for (const auto& [u, v] : edges) t.push_back({u, v, 1.0});
  return Graph(SparseMatrix::from_triplets(n, n, std::move(t)), true, false);
}

inline Graph path_graph(Index n) {
  EdgePairs e;
  for (Index i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return undirected_graph(n, e);
}

inline Graph cycle_graph(Index n) {
  EdgePairs e;
  for (Index i = 0; i < n; ++i) e.emplace_back(i, (i + 1) % n);
  return undirected_graph(n, e);
}

inline Graph complete_graph(Index n) {
  EdgePairs e;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) e.emplace_back(i, j);
  }
  return undirected_graph(n, e);
}

inline Graph star_graph(Index leaves) {
  EdgePairs e;
  for (Index i = 1; i <= leaves; ++i) e.emplace_back(0, i);
  return undirected_graph(leaves + 1, e);
}

/// Two disjoint cliques of `size` nodes: 0..size-1 and size..2*size-1.
inline Graph two_cliques(Index size) {
  EdgePairs e;
  for (Index b = 0; b < 2; ++b) {
    for (Index i = 0; i < size; ++i) {
      for (Index j = i + 1; j < size; ++j) e.emplace_back(b * size + i, b * size + j);
    }
  }
  return undirected_graph(2 * size, e);
}

inline EdgePairs erdos_renyi_edges(Index n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  EdgePairs e;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      if (coin(rng)) e.emplace_back(i, j);
    }
  }
  return e;
}

inline Graph erdos_renyi(Index n, double p, std::mt19937_64& rng) {
  return undirected_graph(n, erdos_renyi_edges(n, p, rng));
}

/// Preferential attachment: each new node links to `m` distinct existing
/// nodes chosen proportionally to degree.
inline Graph barabasi_albert(Index n, Index m, std::mt19937_64& rng) {
  EdgePairs e;
  std::vector<Index> endpoints;
  const Index seed_nodes = std::min(n, m + 1);
  for (Index i = 0; i < seed_nodes; ++i) {
    for (Index j = i + 1; j < seed_nodes; ++j) {
      e.emplace_back(i, j);
      endpoints.push_back(i);
      endpoints.push_back(j);
    }
  }
  for (Index v = seed_nodes; v < n; ++v) {
    std::set<Index> targets;
    std::uniform_int_distribution<std::size_t> pick(0, endpoints.size() - 1);
    while (static_cast<Index>(targets.size()) < std::min(m, v)) {
      targets.insert(endpoints[pick(rng)]);
    }
    for (Index t : targets) {
      e.emplace_back(t, v);
      endpoints.push_back(t);
      endpoints.push_back(v);
    }
  }
  return undirected_graph(n, e);
}

/// Stochastic block model with `blocks` equal blocks of consecutive ids.
inline Graph stochastic_block_model(Index n, Index blocks, double p_in,
                                    double p_out, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const Index block_size = n / blocks;
  EdgePairs e;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const bool same = i / block_size == j / block_size;
      if (uni(rng) < (same ? p_in : p_out)) e.emplace_back(i, j);
    }
  }
  return undirected_graph(n, e);
}

/// Random weights in [lo, hi) on an existing pattern, kept symmetric.
inline Graph with_random_weights(const Graph& g, double lo, double hi,
                                 std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(lo, hi);
  std::vector<Triplet> t;
  const SparseMatrix& a = g.adjacency();
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j : a.row(i).cols) {
      if (g.directed() || i < j) {
        const double w = uni(rng);
        t.push_back({i, j, w});
        if (!g.directed()) t.push_back({j, i, w});
      }
    }
  }
  return Graph(SparseMatrix::from_triplets(a.rows(), a.cols(), std::move(t)),
               g.directed(), true);
}

/// Random sparse matrix with the given density and positive values.
inline SparseMatrix random_sparse(Index rows, Index cols, double density,
                                  std::mt19937_64& rng) {
  std::bernoulli_distribution coin(density);
  std::uniform_real_distribution<double> value(0.05, 2.0);
  std::vector<Triplet> t;
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      if (coin(rng)) t.push_back({i, j, value(rng)});
    }
  }
  return SparseMatrix::from_triplets(rows, cols, std::move(t));
}

/// Dense row-major copy.
inline std::vector<double> to_dense(const SparseMatrix& m) {
  std::vector<double> d(static_cast<std::size_t>(m.rows()) * m.cols(), 0.0);
  for (const Triplet& t : m.to_triplets()) {
    d[static_cast<std::size_t>(t.row) * m.cols() + t.col] = t.value;
  }
  return d;
}

}  // namespace epine::testing
