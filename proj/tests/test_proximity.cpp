#include <cmath>
#include <random>

#include "doctest.h"
#include "epine/error.hpp"
#include "epine/oracle.hpp"
#include "epine/proximity.hpp"
#include "support/fixtures.hpp"

using namespace epine;
using testing::to_dense;

namespace {

// Direct evaluation of the additive product over all (i, t, j).
std::vector<double> dense_additive(const SparseMatrix& x, const SparseMatrix& y) {
  const auto dx = to_dense(x);
  const auto dy = to_dense(y);
  const std::size_t n = x.rows(), r = x.cols(), m = y.cols();
  std::vector<double> z(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < r; ++t) {
        const double a = dx[i * r + t];
        const double b = dy[t * m + j];
        if (a * b != 0.0) s += a + b;
      }
      z[i * m + j] = s;
    }
  }
  return z;
}

SparseMatrix dense_to_sparse(Index n, const std::vector<std::vector<double>>& rows) {
  std::vector<Triplet> t;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < static_cast<Index>(rows[i].size()); ++j) {
      if (rows[i][j] != 0.0) t.push_back({i, j, rows[i][j]});
    }
  }
  return SparseMatrix::from_triplets(n, static_cast<Index>(rows[0].size()), t);
}

}  // namespace

TEST_CASE("vanilla powers count walks") {
  SUBCASE("triangle") {
    const SparseMatrix a2 = vanilla_power(testing::complete_graph(3), 2);
    for (Index i = 0; i < 3; ++i) {
      for (Index j = 0; j < 3; ++j) CHECK(a2.at(i, j) == (i == j ? 2.0 : 1.0));
    }
  }
  SUBCASE("path a-b-c") {
    const SparseMatrix a2 = vanilla_power(testing::path_graph(3), 2);
    CHECK(a2.at(0, 2) == 1.0);
    CHECK(a2.at(0, 0) == 1.0);
    CHECK(a2.at(1, 1) == 2.0);
  }
  SUBCASE("k = 1 and k = 0") {
    const Graph g = testing::cycle_graph(5);
    CHECK(vanilla_power(g, 1) == g.adjacency());
    CHECK(vanilla_power(g, 0) == SparseMatrix::identity(5));
  }
}

TEST_CASE("additive product examples") {
  const SparseMatrix swap = dense_to_sparse(2, {{0, 1}, {1, 0}});
  const SparseMatrix z = additive_product(swap, swap);
  CHECK(z.at(0, 0) == 2.0);
  CHECK(z.at(1, 1) == 2.0);
  CHECK(z.nnz() == 2);

  CHECK(additive_product(swap, SparseMatrix(2, 2)).empty());

  const SparseMatrix x = dense_to_sparse(2, {{0, 0.5}, {0, 0}});
  const SparseMatrix y = dense_to_sparse(2, {{0, 0}, {0.5, 0}});
  const SparseMatrix w = additive_product(x, y);
  CHECK(w.at(0, 0) == 1.0);
  CHECK(w.nnz() == 1);

  CHECK_THROWS_AS(additive_product(SparseMatrix(2, 3), SparseMatrix(2, 2)),
                  ValidationError);
  CHECK_THROWS_AS(multiply(SparseMatrix(2, 3), SparseMatrix(2, 2)),
                  ValidationError);
}

TEST_CASE("additive product equals the dense definition on random inputs") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<Index> dim(1, 30);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = dim(rng), r = dim(rng), m = dim(rng);
    const SparseMatrix x = testing::random_sparse(n, r, 0.2, rng);
    const SparseMatrix y = testing::random_sparse(r, m, 0.2, rng);
    CHECK(to_dense(additive_product(x, y)) == dense_additive(x, y));
  }
}

TEST_CASE("mask is the union of two supports") {
  const Graph path = testing::path_graph(3);
  const MaskMatrix mask = build_mask(SparseMatrix::identity(3), path.adjacency());
  CHECK(mask.forbidden().nnz() == 7);
  for (Index i = 0; i < 3; ++i) CHECK(mask.forbids(i, i));
  CHECK(mask.forbids(0, 1));
  CHECK(mask.forbids(2, 1));
  CHECK_FALSE(mask.forbids(0, 2));

  CHECK(build_mask(SparseMatrix(3, 3), SparseMatrix(3, 3)).forbidden().empty());

  const MaskMatrix twice = build_mask(path.adjacency(), path.adjacency());
  CHECK(twice.forbidden().nnz() == 4);
  for (double v : twice.forbidden().values()) CHECK(v == 1.0);
  CHECK_THROWS_AS(build_mask(SparseMatrix(2, 2), SparseMatrix(3, 3)), ValidationError);
}

TEST_CASE("masked multiply") {
  SUBCASE("4-cycle multiplicative gives two shortest paths to the opposite corner") {
    const Graph c4 = testing::cycle_graph(4);
    const MaskMatrix mask = build_mask(SparseMatrix::identity(4), c4.adjacency());
    const SparseMatrix a2 =
        masked_multiply(c4.adjacency(), c4.adjacency(), mask, MatmulMode::multiplicative);
    CHECK(a2.nnz() == 4);
    CHECK(a2.at(0, 2) == 2.0);
    CHECK(a2.at(1, 3) == 2.0);
    CHECK(a2.at(2, 0) == 2.0);
    CHECK(a2.at(3, 1) == 2.0);
  }
  SUBCASE("triangle yields an empty product") {
    const Graph k3 = testing::complete_graph(3);
    const MaskMatrix mask = build_mask(SparseMatrix::identity(3), k3.adjacency());
    CHECK(masked_multiply(k3.adjacency(), k3.adjacency(), mask,
                          MatmulMode::multiplicative)
              .empty());
  }
  SUBCASE("reweighted 4-cycle in additive mode") {
    const Graph c4 = reweight_by_degree(testing::cycle_graph(4));
    const MaskMatrix mask = build_mask(SparseMatrix::identity(4), c4.adjacency());
    const SparseMatrix a2 =
        masked_multiply(c4.adjacency(), c4.adjacency(), mask, MatmulMode::additive);
    CHECK(a2.at(0, 2) == 1.0);
    CHECK(a2.at(1, 3) == 1.0);
    CHECK(a2.nnz() == 4);
  }
  SUBCASE("shape mismatch") {
    const MaskMatrix mask(SparseMatrix(3, 3));
    CHECK_THROWS_AS(masked_multiply(SparseMatrix(2, 2), SparseMatrix(2, 2), mask,
                                    MatmulMode::multiplicative),
                    ValidationError);
  }
}

TEST_CASE("rectified stack examples") {
  SUBCASE("triangle stops after order 1") {
    const ProximityStack s =
        rectified_stack(testing::complete_graph(3), 5, MatmulMode::multiplicative);
    CHECK(s.reached_order == 1);
    CHECK(s.early_stopped);
    CHECK(s.matrices.size() == 1);
  }
  SUBCASE("path of four nodes") {
    const ProximityStack s =
        rectified_stack(testing::path_graph(4), 3, MatmulMode::multiplicative);
    REQUIRE(s.reached_order == 3);
    CHECK_FALSE(s.early_stopped);
    const SparseMatrix& a2 = s.order(2);
    CHECK(a2.at(0, 2) == 1.0);
    CHECK(a2.at(1, 3) == 1.0);
    CHECK(a2.nnz() == 4);
    const SparseMatrix& a3 = s.order(3);
    CHECK(a3.at(0, 3) == 1.0);
    CHECK(a3.at(3, 0) == 1.0);
    CHECK(a3.nnz() == 2);
  }
  SUBCASE("star: leaves reach each other through the center") {
    const ProximityStack s =
        rectified_stack(testing::star_graph(3), 2, MatmulMode::multiplicative);
    REQUIRE(s.reached_order == 2);
    const SparseMatrix& a2 = s.order(2);
    CHECK(a2.nnz() == 6);
    for (Index i = 1; i <= 3; ++i) {
      for (Index j = 1; j <= 3; ++j) {
        if (i != j) CHECK(a2.at(i, j) == 1.0);
      }
    }
  }
  SUBCASE("k below 2 returns only the adjacency") {
    const Graph g = testing::path_graph(4);
    const ProximityStack s = rectified_stack(g, 1, MatmulMode::additive);
    CHECK(s.reached_order == 1);
    CHECK(s.order(1) == g.adjacency());
    CHECK_FALSE(s.early_stopped);
  }
}

TEST_CASE("directed recurrence follows out-edges without symmetrizing") {
  const Graph g = testing::directed_graph(3, {{0, 1}, {1, 2}});
  const ProximityStack s = rectified_stack(g, 3, MatmulMode::multiplicative);
  REQUIRE(s.reached_order == 2);
  CHECK(s.order(2).nnz() == 1);
  CHECK(s.order(2).at(0, 2) == 1.0);
}

TEST_CASE("additive values follow the recurrence when paths share an intermediate") {
  // Two shortest 2-paths 0->3 (via 1 and via 2) then the edge 3-4.
  const Graph g = testing::undirected_graph(5, {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {3, 4}},
                                            {0.5, 0.5, 0.5, 0.5, 0.5});
  const ProximityStack s = rectified_stack(g, 3, MatmulMode::additive);
  REQUIRE(s.reached_order >= 3);
  CHECK(s.order(2).at(0, 3) == 2.0);
  // The accumulated order-2 cost is extended by the last edge once.
  CHECK(s.order(3).at(0, 4) == 2.5);
  CHECK(shortest_path_sum_oracle(g, 0, 4, 3, MatmulMode::additive) == 3.0);
  // Walking the other way, both intermediates carry separate costs, so the
  // additive recurrence is not symmetric beyond order 2.
  CHECK(s.order(3).at(4, 0) == 3.0);
  CHECK(s.order(2).is_symmetric());
}

TEST_CASE("BFS distance oracle") {
  const DistanceMatrix path = bfs_distance_oracle(testing::path_graph(3));
  CHECK(path(0, 2) == 2);
  CHECK(path.diameter() == 2);
  const DistanceMatrix split =
      bfs_distance_oracle(testing::undirected_graph(4, {{0, 1}, {2, 3}}));
  CHECK(split(0, 2) == DistanceMatrix::kUnreachable);
  CHECK(split.diameter() == 1);
  const DistanceMatrix c4 = bfs_distance_oracle(testing::cycle_graph(4));
  CHECK(c4(0, 2) == 2);
  CHECK(c4(1, 3) == 2);
}

TEST_CASE("shortest path sum oracle") {
  const Graph c4 = testing::cycle_graph(4);
  CHECK(shortest_path_sum_oracle(c4, 0, 2, 2, MatmulMode::multiplicative) == 2.0);
  CHECK(shortest_path_sum_oracle(reweight_by_degree(c4), 0, 2, 2,
                                 MatmulMode::additive) == 1.0);
  CHECK(shortest_path_sum_oracle(testing::complete_graph(3), 0, 1, 2,
                                 MatmulMode::multiplicative) == 0.0);
  PathOracleOptions tiny;
  tiny.budget = 3;
  CHECK_THROWS_AS(shortest_path_sum_oracle(testing::complete_graph(8), 0, 1, 1,
                                           MatmulMode::multiplicative, tiny),
                  OracleOverflow);
}

TEST_CASE("rectified orders match BFS layers and path sums on random graphs") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 25; ++trial) {
    const Index n = 8 + trial % 15;
    Graph g = testing::erdos_renyi(n, 0.25, rng);
    if (trial % 2 == 1) g = testing::with_random_weights(g, 0.2, 3.0, rng);
    const DistanceMatrix dist = bfs_distance_oracle(g);
    for (MatmulMode mode : {MatmulMode::multiplicative, MatmulMode::additive}) {
      const ProximityStack s = rectified_stack(g, n, mode);
      CHECK(s.reached_order <= std::max(1, dist.diameter()));
      for (int k = 1; k <= s.reached_order; ++k) {
        const SparseMatrix& m = s.order(k);
        if (mode == MatmulMode::multiplicative) {
          for (const Triplet& t : m.to_triplets()) {
            CHECK(std::abs(m.at(t.col, t.row) - t.value) <= 1e-12 * t.value);
          }
        } else if (k <= 2) {
          CHECK(m.is_symmetric());
        }
        for (Index i = 0; i < n; ++i) {
          for (Index j = 0; j < n; ++j) {
            CHECK(m.contains(i, j) == (dist(i, j) == k));
            if (mode == MatmulMode::multiplicative && k >= 2) {
              const double want =
                  shortest_path_sum_oracle(g, i, j, k, MatmulMode::multiplicative);
              CHECK(std::abs(m.at(i, j) - want) <= 1e-10 * std::max(1.0, want));
            }
          }
        }
      }
    }
  }
}

TEST_CASE("rectified support is a subset of the vanilla power support") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const Graph g = testing::barabasi_albert(40, 2, rng);
    const ProximityStack s = rectified_stack(g, 4, MatmulMode::multiplicative);
    for (int k = 2; k <= s.reached_order; ++k) {
      const SparseMatrix power = vanilla_power(g, k);
      for (const Triplet& t : s.order(k).to_triplets()) {
        CHECK(power.contains(t.row, t.col));
        CHECK(t.value <= power.at(t.row, t.col));
      }
    }
  }
}

TEST_CASE("results do not depend on the worker count") {
  std::mt19937_64 rng(8);
  const Graph g = testing::with_random_weights(testing::erdos_renyi(400, 0.02, rng),
                                               0.1, 2.0, rng);
  for (MatmulMode mode : {MatmulMode::multiplicative, MatmulMode::additive}) {
    ProductOptions one;
    ProductOptions four;
    four.workers = 4;
    const ProximityStack a = rectified_stack(g, 4, mode, one);
    const ProximityStack b = rectified_stack(g, 4, mode, four);
    REQUIRE(a.reached_order == b.reached_order);
    for (int k = 1; k <= a.reached_order; ++k) CHECK(a.order(k) == b.order(k));
  }
}

TEST_CASE("vanilla stack is the unmasked recurrence") {
  const Graph g = testing::cycle_graph(5);
  const ProximityStack mul = vanilla_stack(g, 3, MatmulMode::multiplicative);
  CHECK(mul.order(2) == vanilla_power(g, 2));
  CHECK(mul.order(3) == vanilla_power(g, 3));
  const ProximityStack add = vanilla_stack(g, 2, MatmulMode::additive);
  CHECK(add.order(2) == additive_product(g.adjacency(), g.adjacency()));
  CHECK(add.mask_mode == MaskMode::vanilla);
}

TEST_CASE("drop tolerance prunes small products") {
  std::mt19937_64 rng(1);
  const Graph g = testing::with_random_weights(testing::path_graph(3), 0.01, 0.02, rng);
  ProductOptions opt;
  opt.drop_tolerance = 1e-3;
  const ProximityStack s = rectified_stack(g, 2, MatmulMode::multiplicative, opt);
  CHECK(s.reached_order == 1);
  CHECK(s.early_stopped);
}
