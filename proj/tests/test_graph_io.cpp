#include <random>
#include <sstream>

#include "doctest.h"
#include "epine/error.hpp"
#include "epine/graph.hpp"
#include "support/fixtures.hpp"

using namespace epine;

namespace {

LoadResult load(const std::string& text, bool weighted = false,
                bool directed = false) {
  std::istringstream in(text);
  return load_edge_list(in, LoadOptions{directed, weighted});
}

}  // namespace

TEST_CASE("path graph edge list") {
  const LoadResult r = load("0 1\n1 2\n");
  const SparseMatrix& a = r.graph.adjacency();
  CHECK(r.graph.num_nodes() == 3);
  CHECK(a.nnz() == 4);
  CHECK(a.at(0, 1) == 1.0);
  CHECK(a.at(1, 0) == 1.0);
  CHECK(a.at(1, 2) == 1.0);
  CHECK(a.at(2, 1) == 1.0);
  CHECK(r.graph.degrees() == std::vector<double>{1.0, 2.0, 1.0});
  CHECK(r.graph.num_edges() == 2);
}

TEST_CASE("self-loops are dropped and counted") {
  const LoadResult r = load("0 0\n");
  CHECK(r.graph.num_nodes() == 1);
  CHECK(r.graph.adjacency().empty());
  CHECK(r.self_loops_dropped == 1);
}

TEST_CASE("weighted duplicates are summed") {
  const LoadResult r = load("0 1 2.5\n0 1 0.5\n", true);
  CHECK(r.graph.adjacency().at(0, 1) == 3.0);
  CHECK(r.graph.adjacency().at(1, 0) == 3.0);
}

TEST_CASE("unweighted duplicates collapse to a single unit edge") {
  const LoadResult r = load("0 1\n1 0\n0 1\n");
  CHECK(r.graph.adjacency().at(0, 1) == 1.0);
  CHECK(r.graph.adjacency().nnz() == 2);
}

TEST_CASE("ids are rebased from one when the minimum id is positive") {
  const LoadResult r = load("# header\n1 2\n\n2 3\n");
  CHECK(r.ids.base == 1);
  CHECK(r.graph.num_nodes() == 3);
  CHECK(r.graph.adjacency().at(0, 1) == 1.0);
  CHECK(r.ids.to_external(2) == 3);
}

TEST_CASE("directed input keeps one direction") {
  const LoadResult r = load("0 1\n", false, true);
  CHECK(r.graph.adjacency().at(0, 1) == 1.0);
  CHECK(r.graph.adjacency().at(1, 0) == 0.0);
}

TEST_CASE("parse errors carry line numbers") {
  try {
    load("0 1\n0 x\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  try {
    load("0 1\n\n1 2 3\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(load("0 1\n", true), ParseError);  // weight column missing
  CHECK_THROWS_AS(load("0 1 -1\n", true), ValidationError);
}

TEST_CASE("save and reload reproduce the adjacency") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const bool weighted = trial % 2 == 1;
    Graph g = testing::erdos_renyi(30, 0.15, rng);
    if (weighted) g = testing::with_random_weights(g, 0.1, 5.0, rng);
    std::stringstream buf;
    save_edge_list(buf, g, IdMap{});
    LoadOptions opt{false, weighted};
    opt.min_nodes = g.num_nodes();
    const LoadResult back = load_edge_list(buf, opt);
    CHECK(back.graph.adjacency() == g.adjacency());
  }
}

TEST_CASE("degree reweighting") {
  SUBCASE("path a-b-c") {
    const Graph g = reweight_by_degree(testing::path_graph(3));
    CHECK(g.adjacency().at(0, 1) == 0.5);
    CHECK(g.adjacency().at(1, 2) == 0.5);
    CHECK(g.degrees() == std::vector<double>{1.0, 2.0, 1.0});
    CHECK(g.weighted());
  }
  SUBCASE("4-cycle") {
    const Graph g = reweight_by_degree(testing::cycle_graph(4));
    for (double v : g.adjacency().values()) CHECK(v == 0.25);
  }
  SUBCASE("single edge is unchanged") {
    const Graph g = reweight_by_degree(testing::path_graph(2));
    CHECK(g.adjacency().at(0, 1) == 1.0);
  }
  SUBCASE("weighted input is rejected") {
    const Graph w = load("0 1 2\n", true).graph;
    CHECK_THROWS_AS(reweight_by_degree(w), ValidationError);
  }
  SUBCASE("isolated nodes keep zero degree") {
    LoadOptions opt;
    opt.min_nodes = 5;
    std::istringstream in("0 1\n1 2\n");
    const Graph g = reweight_by_degree(load_edge_list(in, opt).graph);
    CHECK(g.num_nodes() == 5);
    CHECK(g.degrees()[4] == 0.0);
  }
}

TEST_CASE("reweighting keeps the pattern and symmetry on random graphs") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Graph g = testing::barabasi_albert(60, 2 + trial % 3, rng);
    const Graph r = reweight_by_degree(g);
    CHECK(r.adjacency().same_pattern(g.adjacency()));
    CHECK(r.adjacency().is_symmetric());
  }
}

TEST_CASE("max normalization") {
  const Graph g = load("0 1 2\n1 2 4\n", true).graph;
  const Graph n = normalize_weights_by_max(g);
  CHECK(n.adjacency().at(0, 1) == 0.5);
  CHECK(n.adjacency().at(1, 2) == 1.0);
}

TEST_CASE("label files allow multiple labels per node") {
  std::istringstream in("1 10\n1 30\n2 10\n# comment\n3 20\n");
  const Labels labels = load_labels(in, IdMap{1}, 4);
  CHECK(labels.num_labels == 3);
  CHECK(labels.of_node[0] == std::vector<Index>{0, 2});
  CHECK(labels.of_node[1] == std::vector<Index>{0});
  CHECK(labels.of_node[2] == std::vector<Index>{1});
  CHECK(labels.of_node[3].empty());
  CHECK(labels.external_label_ids == std::vector<std::int64_t>{10, 20, 30});

  std::istringstream bad("9 1\n");
  CHECK_THROWS_AS(load_labels(bad, IdMap{1}, 4), ValidationError);
}
