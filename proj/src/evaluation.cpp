#include "epine/evaluation.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_set>

#include "epine/error.hpp"

namespace epine {

namespace {

double softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::uint64_t pair_key(Index u, Index v) {
  if (u > v) std::swap(u, v);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(u)) << 32) |
         static_cast<std::uint32_t>(v);
}

struct DisjointSets {
  std::vector<Index> parent;
  std::vector<Index> size;

  explicit DisjointSets(Index n) : parent(static_cast<std::size_t>(n)), size(parent.size(), 1) {
    std::iota(parent.begin(), parent.end(), Index{0});
  }
  Index find(Index x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  bool unite(Index a, Index b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (size[a] < size[b]) std::swap(a, b);
    parent[b] = a;
    size[a] += size[b];
    return true;
  }
};

void check_fraction(double f, const char* what) {
  if (!(f > 0.0 && f < 1.0)) {
    throw ValidationError(fmt::format("{} must lie in (0, 1), got {}", what, f));
  }
}

bool has_both_classes(std::span<const int> labels) {
  bool pos = false, neg = false;
  for (int y : labels) (y ? pos : neg) = true;
  return pos && neg;
}

}  // namespace

void LogisticRegression::fit(const Eigen::MatrixXd& x, std::span<const int> labels,
                             const LogisticOptions& options) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (static_cast<std::size_t>(n) != labels.size()) {
    throw ValidationError("logistic regression: label count differs from rows");
  }
  if (!has_both_classes(labels)) {
    throw ValidationError("logistic regression: training labels hold a single class");
  }
  if (options.c <= 0.0) throw ValidationError("logistic regression: C must be positive");

  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;

  const double c = options.c;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(p);
  double b = 0.0;

  auto objective = [&](const Eigen::VectorXd& ww, double bb) {
    const Eigen::VectorXd z = (x * ww).array() + bb;
    double f = 0.5 * ww.squaredNorm();
    for (Eigen::Index i = 0; i < n; ++i) f += c * (softplus(z[i]) - y[i] * z[i]);
    return f;
  };

  double f = objective(w, b);
  double g0 = -1.0;
  iterations_ = 0;
  for (int it = 0; it < options.max_iterations; ++it) {
    const Eigen::VectorXd z = (x * w).array() + b;
    Eigen::VectorXd prob(n), curv(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      prob[i] = sigmoid(z[i]);
      curv[i] = prob[i] * (1.0 - prob[i]);
    }
    const Eigen::VectorXd r = prob - y;

    Eigen::VectorXd grad(p + 1);
    grad.head(p) = w + c * (x.transpose() * r);
    grad[p] = c * r.sum();
    const double gnorm = grad.lpNorm<Eigen::Infinity>();
    if (g0 < 0) g0 = std::max(gnorm, 1.0);
    if (gnorm <= options.tolerance * g0) break;

    Eigen::MatrixXd h(p + 1, p + 1);
    const Eigen::MatrixXd dx = curv.asDiagonal() * x;
    h.topLeftCorner(p, p) = c * (x.transpose() * dx);
    h.topLeftCorner(p, p).diagonal().array() += 1.0;
    const Eigen::VectorXd cross = c * dx.colwise().sum().transpose();
    h.topRightCorner(p, 1) = cross;
    h.bottomLeftCorner(1, p) = cross.transpose();
    h(p, p) = c * curv.sum() + 1e-12;

    const Eigen::VectorXd step = -h.ldlt().solve(grad);
    const double slope = grad.dot(step);
    double t = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 40; ++ls) {
      const Eigen::VectorXd wn = w + t * step.head(p);
      const double bn = b + t * step[p];
      const double fn = objective(wn, bn);
      if (fn <= f + 1e-4 * t * slope) {
        w = wn;
        b = bn;
        f = fn;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    ++iterations_;
    if (!moved) break;
  }
  w_ = std::move(w);
  b_ = b;
}

Eigen::VectorXd LogisticRegression::decision(const Eigen::MatrixXd& x) const {
  if (x.cols() != w_.size()) throw ValidationError("logistic regression: feature width mismatch");
  return (x * w_).array() + b_;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ValidationError("roc_auc: size mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  double n_pos = 0.0, n_neg = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]]) {
        pos_rank_sum += avg_rank;
        n_pos += 1;
      } else {
        n_neg += 1;
      }
    }
    i = j;
  }
  if (n_pos == 0 || n_neg == 0) {
    throw ValidationError("roc_auc: evaluation set holds a single class");
  }
  return (pos_rank_sum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg);
}

std::vector<NodePair> canonical_edges(const Graph& graph) {
  std::vector<NodePair> out;
  const SparseMatrix& a = graph.adjacency();
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j : a.row(i).cols) {
      if (i < j) {
        out.push_back({i, j});
      } else if (graph.directed() && !a.contains(j, i)) {
        out.push_back({j, i});
      }
    }
  }
  if (graph.directed()) {
    std::sort(out.begin(), out.end(),
              [](const NodePair& x, const NodePair& y) { return pair_key(x.u, x.v) < pair_key(y.u, y.v); });
  }
  return out;
}

Eigen::MatrixXd edge_features(const EmbeddingMatrix& emb, std::span<const NodePair> pairs) {
  const Eigen::Index d = emb.dim;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(pairs.size()), 2 * d);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto pi = static_cast<Eigen::Index>(p);
    const auto u = emb.row(pairs[p].u);
    const auto v = emb.row(pairs[p].v);
    for (Eigen::Index c = 0; c < d; ++c) {
      x(pi, c) = u[static_cast<std::size_t>(c)];
      x(pi, d + c) = v[static_cast<std::size_t>(c)];
    }
  }
  return x;
}

std::vector<NodePair> sample_non_edges(const Graph& graph, std::size_t count,
                                       std::uint64_t seed,
                                       std::span<const NodePair> exclude) {
  const Index n = graph.num_nodes();
  std::unordered_set<std::uint64_t> forbidden;
  for (const NodePair& e : canonical_edges(graph)) forbidden.insert(pair_key(e.u, e.v));
  for (const NodePair& e : exclude) {
    if (e.u != e.v) forbidden.insert(pair_key(e.u, e.v));
  }
  const std::size_t total = static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2;
  const std::size_t available = total - forbidden.size();
  if (count > available) {
    throw ValidationError(fmt::format(
        "cannot sample {} unconnected pairs; only {} exist", count, available));
  }

  std::mt19937_64 rng(seed);
  std::vector<NodePair> out;
  out.reserve(count);
  if (2 * count > available) {
    // Dense case: enumerate, shuffle, take a prefix.
    std::vector<NodePair> all;
    all.reserve(available);
    for (Index u = 0; u < n; ++u) {
      for (Index v = u + 1; v < n; ++v) {
        if (!forbidden.contains(pair_key(u, v))) all.push_back({u, v});
      }
    }
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(count);
    return all;
  }
  std::uniform_int_distribution<Index> node(0, n - 1);
  while (out.size() < count) {
    Index u = node(rng), v = node(rng);
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    if (forbidden.insert(pair_key(u, v)).second) out.push_back({u, v});
  }
  return out;
}

RemovalResult connectivity_preserving_removal(const Graph& graph, double fraction,
                                              std::uint64_t seed) {
  check_fraction(fraction, "removal fraction");
  if (graph.directed()) {
    throw ValidationError("connectivity-preserving removal needs an undirected graph");
  }
  const Index n = graph.num_nodes();
  const std::vector<NodePair> edges = canonical_edges(graph);

  DisjointSets comp(n);
  for (const NodePair& e : edges) comp.unite(e.u, e.v);
  Index largest = 0;
  for (Index v = 0; v < n; ++v) {
    if (comp.size[comp.find(v)] > comp.size[comp.find(largest)]) largest = v;
  }
  const Index root = n > 0 ? comp.find(largest) : 0;

  std::vector<std::size_t> in_lcc;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (comp.find(edges[e].u) == root) in_lcc.push_back(e);
  }
  RemovalResult result;
  result.excluded_edges = edges.size() - in_lcc.size();
  if (result.excluded_edges > 0) {
    spdlog::warn("removal: {} edges outside the largest component are kept and never removed",
                 result.excluded_edges);
  }
  result.target = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(in_lcc.size())));

  // Visiting edges in random order and dropping every non-bridge keeps
  // exactly the spanning tree Kruskal builds from the reversed order.
  std::mt19937_64 rng(seed);
  std::shuffle(in_lcc.begin(), in_lcc.end(), rng);
  std::vector<char> in_tree(edges.size(), 0);
  DisjointSets tree(n);
  for (auto it = in_lcc.rbegin(); it != in_lcc.rend(); ++it) {
    if (tree.unite(edges[*it].u, edges[*it].v)) in_tree[*it] = 1;
  }

  std::vector<char> removed(edges.size(), 0);
  for (std::size_t e : in_lcc) {
    if (result.removed.size() == result.target) break;
    if (!in_tree[e]) {
      removed[e] = 1;
      result.removed.push_back(edges[e]);
    }
  }
  if (result.removed.size() < result.target) {
    spdlog::warn("removal: only {} of {} edges removable without disconnecting the graph",
                 result.removed.size(), result.target);
  }

  std::vector<Triplet> kept;
  const SparseMatrix& a = graph.adjacency();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (removed[e]) continue;
    const double w = a.at(edges[e].u, edges[e].v);
    kept.push_back({edges[e].u, edges[e].v, w});
    kept.push_back({edges[e].v, edges[e].u, w});
  }
  result.train = Graph(SparseMatrix::from_triplets(n, n, kept), false, graph.weighted());
  return result;
}

double binary_edge_auc(const EmbeddingMatrix& emb, std::span<const NodePair> positives,
                       std::span<const NodePair> negatives, double train_fraction,
                       std::uint64_t seed, const LogisticOptions& options) {
  check_fraction(train_fraction, "train fraction");
  std::mt19937_64 rng(seed);
  std::vector<NodePair> pos(positives.begin(), positives.end());
  std::vector<NodePair> neg(negatives.begin(), negatives.end());
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);
  const auto cut = [&](std::size_t m) {
    return static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(m)));
  };
  const std::size_t pt = cut(pos.size()), nt = cut(neg.size());

  std::vector<NodePair> train_pairs, test_pairs;
  std::vector<int> train_y, test_y;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    (i < pt ? train_pairs : test_pairs).push_back(pos[i]);
    (i < pt ? train_y : test_y).push_back(1);
  }
  for (std::size_t i = 0; i < neg.size(); ++i) {
    (i < nt ? train_pairs : test_pairs).push_back(neg[i]);
    (i < nt ? train_y : test_y).push_back(0);
  }
  if (!has_both_classes(test_y)) {
    throw ValidationError("edge AUC: held-out set holds a single class");
  }
  if (!has_both_classes(train_y)) {
    throw ValidationError("edge AUC: training set holds a single class");
  }
  LogisticRegression model;
  model.fit(edge_features(emb, train_pairs), train_y, options);
  const Eigen::VectorXd scores = model.decision(edge_features(emb, test_pairs));
  return roc_auc(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())),
                 test_y);
}

double reconstruction_auc(const Graph& graph, const EmbeddingMatrix& emb,
                          std::uint64_t seed, double train_fraction) {
  const std::vector<NodePair> pos = canonical_edges(graph);
  const std::vector<NodePair> neg = sample_non_edges(graph, pos.size(), seed ^ 0x5bd1e995ULL);
  return binary_edge_auc(emb, pos, neg, train_fraction, seed);
}

LinkPredictionSplit link_prediction_split(const Graph& graph, double removal_fraction,
                                          std::uint64_t seed) {
  RemovalResult r = connectivity_preserving_removal(graph, removal_fraction, seed);
  LinkPredictionSplit split;
  // Sampling against the original graph keeps removed edges out of the
  // negatives.
  split.negatives = sample_non_edges(graph, r.removed.size(), seed ^ 0x5bd1e995ULL);
  split.positives = std::move(r.removed);
  split.train = std::move(r.train);
  return split;
}

namespace {

struct Counts {
  std::vector<double> tp, fp, fn;
  explicit Counts(Index labels)
      : tp(static_cast<std::size_t>(labels), 0.0), fp(tp), fn(tp) {}
};

std::pair<double, double> f1_from(const Counts& c) {
  double tp = 0, fp = 0, fn = 0, macro = 0;
  int counted = 0;
  for (std::size_t l = 0; l < c.tp.size(); ++l) {
    tp += c.tp[l];
    fp += c.fp[l];
    fn += c.fn[l];
    const double denom = 2 * c.tp[l] + c.fp[l] + c.fn[l];
    if (denom > 0) {
      macro += 2 * c.tp[l] / denom;
      ++counted;
    }
  }
  const double denom = 2 * tp + fp + fn;
  return {denom > 0 ? 2 * tp / denom : 0.0, counted ? macro / counted : 0.0};
}

}  // namespace

F1Scores multilabel_f1(const EmbeddingMatrix& emb, const Labels& labels,
                       double train_fraction, std::uint64_t seed, int runs,
                       const LogisticOptions& options, int workers) {
  check_fraction(train_fraction, "train fraction");
  if (runs < 1) throw ValidationError("multilabel F1 needs at least one run");
  if (labels.of_node.size() != static_cast<std::size_t>(emb.rows)) {
    throw ValidationError("label table and embedding cover different node counts");
  }
  std::vector<Index> nodes;
  for (Index v = 0; v < emb.rows; ++v) {
    if (!labels.of_node[static_cast<std::size_t>(v)].empty()) nodes.push_back(v);
  }
  const auto n_train = static_cast<std::size_t>(
      std::floor(train_fraction * static_cast<double>(nodes.size())));
  if (n_train == 0 || n_train == nodes.size()) {
    throw ValidationError(fmt::format(
        "train fraction {} leaves an empty side among {} labeled nodes", train_fraction,
        nodes.size()));
  }
  const Index num_labels = labels.num_labels;

  F1Scores out;
  out.micro_per_run.assign(static_cast<std::size_t>(runs), 0.0);
  out.macro_per_run.assign(static_cast<std::size_t>(runs), 0.0);

#pragma omp parallel for num_threads(std::max(1, workers)) schedule(dynamic)
  for (int run = 0; run < runs; ++run) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(run)};
    std::mt19937_64 rng(seq);
    std::vector<Index> order = nodes;
    std::shuffle(order.begin(), order.end(), rng);
    const std::span<const Index> train(order.data(), n_train);
    const std::span<const Index> test(order.data() + n_train, order.size() - n_train);

    auto features = [&](std::span<const Index> vs) {
      Eigen::MatrixXd x(static_cast<Eigen::Index>(vs.size()), emb.dim);
      for (std::size_t r = 0; r < vs.size(); ++r) {
        const auto row = emb.row(vs[r]);
        for (int c = 0; c < emb.dim; ++c) x(static_cast<Eigen::Index>(r), c) = row[static_cast<std::size_t>(c)];
      }
      return x;
    };
    const Eigen::MatrixXd xtr = features(train);
    const Eigen::MatrixXd xte = features(test);

    Eigen::MatrixXd scores(xte.rows(), num_labels);
    for (Index l = 0; l < num_labels; ++l) {
      std::vector<int> y(train.size());
      std::size_t positives = 0;
      for (std::size_t r = 0; r < train.size(); ++r) {
        const auto& ls = labels.of_node[static_cast<std::size_t>(train[r])];
        y[r] = std::find(ls.begin(), ls.end(), l) != ls.end();
        positives += static_cast<std::size_t>(y[r]);
      }
      if (positives == 0 || positives == train.size()) {
        if (positives == 0) {
          spdlog::warn("classification run {}: label {} absent from training; scored negative",
                       run, labels.external_label_ids.empty() ? l : labels.external_label_ids[static_cast<std::size_t>(l)]);
        }
        scores.col(l).setConstant(positives ? std::numeric_limits<double>::infinity()
                                            : -std::numeric_limits<double>::infinity());
        continue;
      }
      LogisticRegression model;
      model.fit(xtr, y, options);
      scores.col(l) = model.decision(xte);
    }

    Counts counts(num_labels);
    std::vector<Index> rank(static_cast<std::size_t>(num_labels));
    std::vector<char> predicted(static_cast<std::size_t>(num_labels));
    for (std::size_t r = 0; r < test.size(); ++r) {
      const auto& truth = labels.of_node[static_cast<std::size_t>(test[r])];
      std::iota(rank.begin(), rank.end(), Index{0});
      const auto ri = static_cast<Eigen::Index>(r);
      std::stable_sort(rank.begin(), rank.end(),
                       [&](Index a, Index b) { return scores(ri, a) > scores(ri, b); });
      std::fill(predicted.begin(), predicted.end(), 0);
      for (std::size_t k = 0; k < truth.size() && k < rank.size(); ++k) predicted[rank[k]] = 1;
      for (Index l = 0; l < num_labels; ++l) {
        const bool actual = std::find(truth.begin(), truth.end(), l) != truth.end();
        const bool guess = predicted[static_cast<std::size_t>(l)];
        if (actual && guess) counts.tp[l] += 1;
        if (!actual && guess) counts.fp[l] += 1;
        if (actual && !guess) counts.fn[l] += 1;
      }
    }
    const auto [micro, macro] = f1_from(counts);
    out.micro_per_run[static_cast<std::size_t>(run)] = micro;
    out.macro_per_run[static_cast<std::size_t>(run)] = macro;
  }

  out.micro = std::accumulate(out.micro_per_run.begin(), out.micro_per_run.end(), 0.0) / runs;
  out.macro = std::accumulate(out.macro_per_run.begin(), out.macro_per_run.end(), 0.0) / runs;
  return out;
}

}  // namespace epine
