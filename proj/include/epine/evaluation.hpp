#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "epine/embedding.hpp"
#include "epine/graph.hpp"

namespace epine {

/// L2-regularized logistic regression, LIBLINEAR-style objective
///   0.5 |w|^2 + C * sum log(1 + exp(-y (w.x + b)))
/// with an unregularized bias, solved by damped Newton.
struct LogisticOptions {
  double c = 1.0;
  int max_iterations = 100;
  double tolerance = 1e-8;
};

class LogisticRegression {
 public:
  /// labels are 0/1. Both classes must be present.
  void fit(const Eigen::MatrixXd& x, std::span<const int> labels,
           const LogisticOptions& options = {});
  Eigen::VectorXd decision(const Eigen::MatrixXd& x) const;

  const Eigen::VectorXd& weights() const noexcept { return w_; }
  double bias() const noexcept { return b_; }
  int iterations() const noexcept { return iterations_; }

 private:
  Eigen::VectorXd w_;
  double b_ = 0.0;
  int iterations_ = 0;
};

/// Area under the ROC curve; tied scores get their average rank.
/// Throws ValidationError unless both classes are present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct NodePair {
  Index u = 0;
  Index v = 0;
  friend bool operator==(const NodePair&, const NodePair&) = default;
};

/// Each undirected edge once as (u, v) with u < v.
std::vector<NodePair> canonical_edges(const Graph& graph);

/// Row p is [x_u, x_v] for pairs[p] = (u, v); width 2d.
Eigen::MatrixXd edge_features(const EmbeddingMatrix& emb, std::span<const NodePair> pairs);

/// `count` distinct unconnected pairs u < v drawn uniformly, skipping any
/// pair in `exclude`. Throws ValidationError if not enough pairs exist.
std::vector<NodePair> sample_non_edges(const Graph& graph, std::size_t count,
                                       std::uint64_t seed,
                                       std::span<const NodePair> exclude = {});

struct RemovalResult {
  Graph train;
  std::vector<NodePair> removed;
  std::size_t target = 0;
  /// Edges outside the largest component; never removed.
  std::size_t excluded_edges = 0;
};

/// Removes floor(fraction * |E_lcc|) edges of the largest component, in a
/// random order, skipping any edge whose removal would disconnect it.
/// Undirected graphs only. Falls short with a warning when bridges block
/// the target.
RemovalResult connectivity_preserving_removal(const Graph& graph, double fraction,
                                              std::uint64_t seed);

/// Stratified split of positives and negatives, logistic regression on
/// concatenated endpoint features, ROC-AUC on the held-out part.
double binary_edge_auc(const EmbeddingMatrix& emb, std::span<const NodePair> positives,
                       std::span<const NodePair> negatives, double train_fraction,
                       std::uint64_t seed, const LogisticOptions& options = {});

/// Reconstruction: every edge against as many unconnected pairs.
double reconstruction_auc(const Graph& graph, const EmbeddingMatrix& emb,
                          std::uint64_t seed, double train_fraction = 0.8);

struct LinkPredictionSplit {
  Graph train;
  std::vector<NodePair> positives;  // removed edges
  std::vector<NodePair> negatives;  // unconnected in the original graph
};

LinkPredictionSplit link_prediction_split(const Graph& graph, double removal_fraction,
                                          std::uint64_t seed);

struct F1Scores {
  double micro = 0.0;
  double macro = 0.0;
  std::vector<double> micro_per_run;
  std::vector<double> macro_per_run;
};

/// One-vs-rest logistic models; a test node with l true labels is assigned
/// its l best-scoring labels. Nodes without labels are not evaluated.
/// Runs execute in parallel on up to `workers` threads; results do not
/// depend on the worker count.
F1Scores multilabel_f1(const EmbeddingMatrix& emb, const Labels& labels,
                       double train_fraction, std::uint64_t seed, int runs,
                       const LogisticOptions& options = {}, int workers = 1);

}  // namespace epine
