#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "epine/alias_table.hpp"
#include "epine/graph.hpp"
#include "epine/sparse_matrix.hpp"

namespace epine {

/// Row-major |V| x d matrix of node vectors. Second-order training also
/// produces context vectors of the same shape.
struct EmbeddingMatrix {
  Index rows = 0;
  int dim = 0;
  std::vector<double> vectors;
  std::vector<double> context;
  std::uint64_t fingerprint = 0;

  EmbeddingMatrix() = default;
  EmbeddingMatrix(Index rows, int dim)
      : rows(rows),
        dim(dim),
        vectors(static_cast<std::size_t>(rows) * static_cast<std::size_t>(dim),
                0.0) {}

  std::span<const double> row(Index i) const {
    return std::span<const double>(vectors).subspan(
        static_cast<std::size_t>(i) * static_cast<std::size_t>(dim),
        static_cast<std::size_t>(dim));
  }
  std::span<double> row(Index i) {
    return std::span<double>(vectors).subspan(
        static_cast<std::size_t>(i) * static_cast<std::size_t>(dim),
        static_cast<std::size_t>(dim));
  }
};

enum class LineOrder : std::uint8_t { first = 1, second = 2, both = 3 };

std::string to_string(LineOrder order);
LineOrder parse_line_order(std::string_view text);

struct TrainConfig {
  LineOrder order = LineOrder::second;
  int dimension = 128;
  /// Total edge draws. When unset: samples_per_entry * nnz(S), capped by
  /// max_samples.
  std::optional<std::int64_t> samples;
  double samples_per_entry = 100.0;
  std::int64_t max_samples = 10'000'000'000;
  int negatives = 5;
  double initial_learning_rate = 0.025;
  /// Learning rate decays linearly and never drops below this fraction of
  /// the initial rate.
  double min_learning_rate_fraction = 1e-4;
  double noise_exponent = 0.75;
  /// For LineOrder::both: true trains two full-width runs (2d output),
  /// false trains two d/2 runs so the output has width d.
  bool both_full_width = false;
  int workers = 1;

  void validate() const;
  std::int64_t resolved_samples(std::size_t nnz) const;
};

/// Edge and negative-node samplers for a similarity matrix viewed as a
/// weighted directed graph (each stored entry is one edge).
class SamplerState {
 public:
  /// Throws ValidationError when the matrix has no stored entries.
  SamplerState(const SparseMatrix& similarity, double noise_exponent);

  std::size_t num_edges() const noexcept { return edge_src_.size(); }
  Index edge_source(std::size_t e) const { return edge_src_[e]; }
  Index edge_target(std::size_t e) const { return edge_dst_[e]; }
  const AliasTable& edges() const noexcept { return edge_table_; }
  const AliasTable& nodes() const noexcept { return node_table_; }

 private:
  std::vector<Index> edge_src_;
  std::vector<Index> edge_dst_;
  AliasTable edge_table_;
  AliasTable node_table_;
};

struct TrainReport {
  std::int64_t samples = 0;
  double final_learning_rate = 0.0;
  /// (progress in [0, 1], exponentially smoothed loss) at every 1%.
  std::vector<std::pair<double, double>> smoothed_loss;
};

/// Negative-sampling loss for one sample: the source vector against a
/// positive target (label 1) and negative targets (label 0).
double sample_loss(std::span<const double> source,
                   std::span<const std::span<const double>> targets,
                   std::span<const int> labels);

/// One stochastic step on a sample, exactly the update the trainer applies.
/// Every target moves against its gradient using the pre-step source, then
/// the source moves using the pre-step targets. Returns the pre-step loss.
double sgd_step(std::span<double> source, std::span<const std::span<double>> targets,
                std::span<const int> labels, double learning_rate);

/// LINE-style training on the similarity matrix.
///
/// First order scores pairs by vectors . vectors; second order by
/// vectors . context. Throws TrainingDiverged on a non-finite loss.
/// Single-worker runs are bit-reproducible for a given seed.
EmbeddingMatrix train(const SparseMatrix& similarity, const TrainConfig& cfg,
                      std::uint64_t seed, TrainReport* report = nullptr);

/// Max relative error between the trainer's step and central differences of
/// `sample_loss`, for one explicit sample. Targets must be distinct.
double check_sample_gradient(std::span<const double> source,
                             const std::vector<std::vector<double>>& targets,
                             std::span<const int> labels, double h = 1e-5);

/// Draws random parameters, an edge and `cfg.negatives` distinct negatives
/// from a tiny similarity matrix (<= 10 nodes) and checks the step's
/// gradient. Uses dimension min(cfg.dimension, 4).
double gradient_check(const SparseMatrix& similarity, const TrainConfig& cfg,
                      std::uint64_t seed, double h = 1e-5);

/// Text: "rows dim" header, then "node_id v1 ... vd" per node.
void write_embedding_text(const std::filesystem::path& path,
                          const EmbeddingMatrix& emb, const IdMap& ids = {});
EmbeddingMatrix read_embedding_text(const std::filesystem::path& path,
                                    const IdMap& ids = {});

/// Binary: "EPEM" u32 version, i64 rows, i64 dim, u64 fingerprint,
/// f64 vectors[rows * dim], u64 FNV-1a checksum of the preceding bytes.
void write_embedding_binary(const std::filesystem::path& path,
                            const EmbeddingMatrix& emb);
EmbeddingMatrix read_embedding_binary(const std::filesystem::path& path);

}  // namespace epine
