#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "doctest.h"
#include "epine/alias_table.hpp"
#include "epine/embedding.hpp"
#include "epine/error.hpp"
#include "support/fixtures.hpp"

using namespace epine;

namespace {

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    ab += a[c] * b[c];
    aa += a[c] * a[c];
    bb += b[c] * b[c];
  }
  return ab / std::sqrt(aa * bb);
}

std::vector<double> frequencies(const AliasTable& table, int draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> counts(table.size(), 0.0);
  for (int k = 0; k < draws; ++k) counts[table(rng)] += 1.0;
  for (double& c : counts) c /= draws;
  return counts;
}

}  // namespace

TEST_CASE("alias table draws match the weights") {
  SUBCASE("weights 1 and 3") {
    const std::vector<double> w{1.0, 3.0};
    const AliasTable t(w);
    const auto f = frequencies(t, 1'000'000, 1);
    CHECK(std::abs(f[0] - 0.25) < 0.01);
    CHECK(std::abs(f[1] - 0.75) < 0.01);
    CHECK(t.probability(0) == doctest::Approx(0.25));
  }
  SUBCASE("uniform weights") {
    const std::vector<double> w(7, 2.0);
    const auto f = frequencies(AliasTable(w), 1'000'000, 2);
    for (double x : f) CHECK(std::abs(x - 1.0 / 7.0) < 0.01);
  }
  SUBCASE("single outcome") {
    const std::vector<double> w{0.3};
    const auto f = frequencies(AliasTable(w), 1000, 3);
    CHECK(f[0] == 1.0);
  }
  SUBCASE("zero-weight outcomes are never drawn") {
    const std::vector<double> w{0.0, 1.0, 0.0, 2.0};
    const auto f = frequencies(AliasTable(w), 100'000, 4);
    CHECK(f[0] == 0.0);
    CHECK(f[2] == 0.0);
  }
  SUBCASE("invalid weights") {
    CHECK_THROWS_AS(AliasTable(std::vector<double>{}), ValidationError);
    CHECK_THROWS_AS(AliasTable(std::vector<double>{0.0, 0.0}), ValidationError);
    CHECK_THROWS_AS(AliasTable(std::vector<double>{1.0, -1.0}), ValidationError);
  }
  SUBCASE("implied probabilities sum to one on random weights") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uni(0.0, 10.0);
    std::vector<double> w(50);
    for (double& x : w) x = uni(rng);
    const AliasTable t(w);
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (std::size_t k = 0; k < w.size(); ++k) {
      CHECK(t.probability(k) == doctest::Approx(w[k] / total).epsilon(1e-9));
    }
  }
}

TEST_CASE("sampler needs a non-empty similarity") {
  CHECK_THROWS_AS(SamplerState(SparseMatrix(3, 3), 0.75), ValidationError);
  CHECK_THROWS_AS(train(SparseMatrix(3, 3), TrainConfig{}, 1), ValidationError);
}

TEST_CASE("zero samples leave the initialization in place") {
  const SparseMatrix s = testing::cycle_graph(6).adjacency();
  TrainConfig cfg;
  cfg.dimension = 8;
  cfg.samples = 0;
  const EmbeddingMatrix a = train(s, cfg, 42);
  const EmbeddingMatrix b = train(s, cfg, 42);
  CHECK(a.vectors == b.vectors);
  for (double v : a.vectors) CHECK(std::abs(v) <= 0.5 / 8);
  for (double v : a.context) CHECK(v == 0.0);
  cfg.samples = 1000;
  CHECK(train(s, cfg, 42).vectors != a.vectors);
}

TEST_CASE("single-worker training is bit-reproducible") {
  const SparseMatrix s = testing::two_cliques(5).adjacency();
  TrainConfig cfg;
  cfg.dimension = 6;
  cfg.samples = 20'000;
  for (LineOrder order : {LineOrder::first, LineOrder::second, LineOrder::both}) {
    cfg.order = order;
    CHECK(train(s, cfg, 9).vectors == train(s, cfg, 9).vectors);
    CHECK(train(s, cfg, 9).vectors != train(s, cfg, 10).vectors);
  }
}

TEST_CASE("scaling the similarity leaves training unchanged") {
  const SparseMatrix s = testing::two_cliques(4).adjacency();
  TrainConfig cfg;
  cfg.dimension = 4;
  cfg.samples = 5'000;
  CHECK(train(s, cfg, 3).vectors == train(s.scaled(8.0), cfg, 3).vectors);
}

TEST_CASE("first order separates two cliques") {
  const SparseMatrix s = testing::two_cliques(5).adjacency();
  TrainConfig cfg;
  cfg.order = LineOrder::first;
  cfg.dimension = 2;
  cfg.samples = 50'000;
  const EmbeddingMatrix e = train(s, cfg, 1);
  double intra = 0, inter = 0;
  int n_intra = 0, n_inter = 0;
  for (Index i = 0; i < 10; ++i) {
    for (Index j = i + 1; j < 10; ++j) {
      const double c = cosine(e.row(i), e.row(j));
      if (i / 5 == j / 5) {
        intra += c;
        ++n_intra;
      } else {
        inter += c;
        ++n_inter;
      }
    }
  }
  CHECK(intra / n_intra > inter / n_inter);
}

TEST_CASE("second order pulls together nodes with shared neighbours") {
  const SparseMatrix s = testing::cycle_graph(4).adjacency();
  TrainConfig cfg;
  cfg.order = LineOrder::second;
  cfg.dimension = 4;
  cfg.samples = 40'000;
  const EmbeddingMatrix e = train(s, cfg, 5);
  const double opposite = (cosine(e.row(0), e.row(2)) + cosine(e.row(1), e.row(3))) / 2;
  const double adjacent = (cosine(e.row(0), e.row(1)) + cosine(e.row(1), e.row(2)) +
                           cosine(e.row(2), e.row(3)) + cosine(e.row(3), e.row(0))) / 4;
  CHECK(opposite > adjacent);
}

TEST_CASE("smoothed loss decreases on the clique pair") {
  const SparseMatrix s = testing::two_cliques(8).adjacency();
  TrainConfig cfg;  // defaults: second order, d = 128, 100 samples per entry
  TrainReport report;
  train(s, cfg, 7, &report);
  REQUIRE(report.smoothed_loss.size() == 100);
  CHECK(report.smoothed_loss.front().first == doctest::Approx(0.01));
  CHECK(report.smoothed_loss.back().second < report.smoothed_loss.front().second);
  CHECK(report.samples == 100 * static_cast<std::int64_t>(s.nnz()));
  CHECK(report.final_learning_rate < cfg.initial_learning_rate * 0.01);
}

TEST_CASE("combined orders concatenate two runs") {
  const SparseMatrix s = testing::two_cliques(4).adjacency();
  TrainConfig cfg;
  cfg.order = LineOrder::both;
  cfg.dimension = 8;
  cfg.samples = 2000;
  CHECK(train(s, cfg, 1).dim == 8);
  cfg.both_full_width = true;
  CHECK(train(s, cfg, 1).dim == 16);
}

TEST_CASE("divergence is reported with the learning rate and step") {
  const SparseMatrix s = testing::two_cliques(4).adjacency();
  TrainConfig cfg;
  cfg.dimension = 4;
  cfg.samples = 10'000;
  cfg.initial_learning_rate = 1e300;
  try {
    train(s, cfg, 1);
    FAIL("expected divergence");
  } catch (const TrainingDiverged& e) {
    CHECK(e.learning_rate() > 0.0);
    CHECK(e.step() >= 0);
  }
}

TEST_CASE("multi-worker training runs and stays finite") {
  const SparseMatrix s = testing::two_cliques(6).adjacency();
  TrainConfig cfg;
  cfg.dimension = 8;
  cfg.samples = 40'000;
  cfg.workers = 4;
  const EmbeddingMatrix e = train(s, cfg, 2);
  for (double v : e.vectors) CHECK(std::isfinite(v));
}

TEST_CASE("gradient of one sample matches central differences") {
  SUBCASE("random tiny instances") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 30; ++trial) {
      const Graph g = testing::erdos_renyi(8, 0.4, rng);
      if (g.adjacency().empty()) continue;
      TrainConfig cfg;
      cfg.dimension = 4;
      cfg.negatives = 3;
      cfg.order = trial % 2 ? LineOrder::first : LineOrder::second;
      CHECK(gradient_check(g.adjacency(), cfg, 100 + trial) < 1e-4);
    }
  }
  SUBCASE("zero vectors") {
    const std::vector<double> src(3, 0.0);
    const std::vector<std::vector<double>> tgt(3, std::vector<double>(3, 0.0));
    const std::vector<int> labels{1, 0, 0};
    CHECK(check_sample_gradient(src, tgt, labels) < 1e-4);
  }
  SUBCASE("single positive without negatives") {
    const std::vector<double> src{0.3, -0.2};
    const std::vector<std::vector<double>> tgt{{0.1, 0.4}};
    const std::vector<int> labels{1};
    CHECK(check_sample_gradient(src, tgt, labels) < 1e-4);
    // Pure attraction: the step moves the score up.
    std::vector<double> s2 = src;
    std::vector<double> t2 = tgt[0];
    std::vector<std::span<double>> views{t2};
    sgd_step(s2, views, labels, 0.1);
    CHECK(s2[0] * t2[0] + s2[1] * t2[1] > src[0] * tgt[0][0] + src[1] * tgt[0][1]);
  }
}

TEST_CASE("embedding files round-trip") {
  const SparseMatrix s = testing::two_cliques(3).adjacency();
  TrainConfig cfg;
  cfg.dimension = 5;
  cfg.samples = 500;
  EmbeddingMatrix e = train(s, cfg, 4);
  e.fingerprint = 77;
  const auto dir = std::filesystem::temp_directory_path();
  const auto txt = dir / "epine_test_emb.txt";
  const auto bin = dir / "epine_test_emb.bin";

  write_embedding_text(txt, e, IdMap{1});
  {
    std::ifstream in(txt);
    std::string header;
    std::getline(in, header);
    CHECK(header == "6 5");
  }
  const EmbeddingMatrix t = read_embedding_text(txt, IdMap{1});
  CHECK(t.vectors == e.vectors);

  write_embedding_binary(bin, e);
  const EmbeddingMatrix b = read_embedding_binary(bin);
  CHECK(b.vectors == e.vectors);
  CHECK(b.fingerprint == 77);
  {
    std::fstream f(bin, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(40);
    f.put('\x01');
  }
  CHECK_THROWS_AS(read_embedding_binary(bin), ChecksumError);
  std::filesystem::remove(txt);
  std::filesystem::remove(bin);
}
