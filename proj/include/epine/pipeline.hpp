#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "epine/embedding.hpp"
#include "epine/evaluation.hpp"
#include "epine/graph.hpp"
#include "epine/modes.hpp"
#include "epine/proximity.hpp"
#include "epine/similarity.hpp"

namespace epine {

enum class Task : std::uint8_t { reconstruction, link_prediction, classification };

std::string to_string(Task task);
Task parse_task(std::string_view text);

/// Flat key=value configuration for the whole pipeline. Keys match the
/// member names below; `to_text` writes every key.
struct PipelineConfig {
  // input
  std::filesystem::path dataset;
  std::filesystem::path labels;
  bool directed = false;
  bool weighted = false;
  int id_base = -1;

  // proximity and similarity
  int order = 2;
  MatmulMode matmul = MatmulMode::additive;
  MaskMode mask = MaskMode::rectified;
  bool reweight = true;
  bool normalize_weights = false;
  double drop_tolerance = 0.0;
  std::string decay = "geom:0.1";
  double eta = 11e-4;
  AlphaSource alpha_source = AlphaSource::truncated;

  // embedding
  TrainConfig trainer;

  // evaluation
  /// Classification needs a label file, so it is opt-in.
  std::vector<Task> tasks{Task::reconstruction, Task::link_prediction};
  double reconstruction_train = 0.8;
  double removal_fraction = 0.4;
  double classification_train = 0.9;
  int classification_runs = 10;
  double logistic_c = 1.0;
  int seeds = 1;

  std::filesystem::path output = "epine_out";
  std::uint64_t seed = 1;
  int workers = 1;
  std::string variant = "EPINE";

  /// Throws ValidationError on unknown keys or malformed values.
  void set(std::string_view key, std::string_view value);
  /// "key=value"
  void apply_override(std::string_view assignment);
  /// Range checks; with `check_paths`, dataset and label files must exist.
  void validate(bool check_paths) const;
  std::string to_text() const;
  SimilarityOptions similarity_options() const;
  ProductOptions product_options() const;
};

/// Parses key=value lines; '#' starts a comment. Unset keys keep their
/// defaults, except `workers`, which defaults to $EPINE_WORKERS when set.
PipelineConfig parse_config(std::istream& in);
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig default_config();

/// Content fingerprints. Each stage key covers everything the stage output
/// depends on, so equal keys mean interchangeable artifacts.
std::uint64_t graph_fingerprint(const Graph& graph);
std::uint64_t stack_key(std::uint64_t graph_fp, const PipelineConfig& cfg);
std::uint64_t similarity_key(std::uint64_t stack_fp, const PipelineConfig& cfg);
std::uint64_t embedding_key(std::uint64_t similarity_fp, const PipelineConfig& cfg,
                            std::uint64_t seed);
std::string hex(std::uint64_t value);

Graph load_dataset(const PipelineConfig& cfg, IdMap* ids = nullptr);
/// Degree reweighting and max normalization per the config.
Graph prepare_graph(const Graph& raw, const PipelineConfig& cfg);

/// Content-addressed store for stage outputs under one directory.
class StageCache {
 public:
  explicit StageCache(std::filesystem::path dir);
  const std::filesystem::path& dir() const noexcept { return dir_; }

  std::filesystem::path stack_path(std::uint64_t key, int order) const;
  std::filesystem::path stack_manifest_path(std::uint64_t key) const;
  std::filesystem::path similarity_path(std::uint64_t key) const;
  std::filesystem::path embedding_path(std::uint64_t key) const;

  std::optional<ProximityStack> load_stack(std::uint64_t key) const;
  void store_stack(std::uint64_t key, const ProximityStack& stack) const;
  std::optional<SparseMatrix> load_similarity(std::uint64_t key) const;
  void store_similarity(std::uint64_t key, const SparseMatrix& s) const;
  std::optional<EmbeddingMatrix> load_embedding(std::uint64_t key) const;
  void store_embedding(const EmbeddingMatrix& emb) const;

 private:
  std::filesystem::path dir_;
};

struct StageTiming {
  double proximity_seconds = 0.0;
  double similarity_seconds = 0.0;
  double embedding_seconds = 0.0;
  bool proximity_cached = false;
  bool similarity_cached = false;
  bool embedding_cached = false;
};

struct PipelineResult {
  std::uint64_t graph_fp = 0;
  std::uint64_t stack_fp = 0;
  std::uint64_t similarity_fp = 0;
  ProximityStack stack;
  SimilarityMatrix similarity;
  EmbeddingMatrix embedding;
  TrainReport report;
  StageTiming timing;
};

/// Raw graph to embedding. With a cache, stages whose key is present are
/// read back instead of recomputed; corrupt files raise ChecksumError.
PipelineResult run_pipeline(const Graph& raw, const PipelineConfig& cfg, std::uint64_t seed,
                            const StageCache* cache = nullptr);

struct MetricRecord {
  std::string task;
  std::string variant;
  std::uint64_t seed = 0;
  std::map<std::string, double> metrics;
  std::uint64_t fingerprint = 0;

  std::string to_json() const;
};

/// Runs the configured tasks for one seed. `embedding` must come from the
/// full graph; link prediction trains its own on the reduced graph.
std::vector<MetricRecord> evaluate_tasks(const Graph& raw, const Labels* labels,
                                         const EmbeddingMatrix& embedding,
                                         const PipelineConfig& cfg, std::uint64_t seed,
                                         const StageCache* cache = nullptr);

/// Which pipeline steps an ablation variant switches on.
struct AblationFlags {
  bool reweight = false;
  bool high_order = false;  // off: S = A only
  MaskMode mask = MaskMode::rectified;
  MatmulMode matmul = MatmulMode::multiplicative;
  bool truncate = false;
};

struct AblationVariant {
  std::string name;
  AblationFlags flags;
};

/// Base row plus the six rows of the step-by-step ablation table:
///   LINE                         all off
///   1  + reweighting             reweight
///   2  + rectified second-order  reweight, order k, rectified, multiplicative
///   2a w/o reweighting           order k, rectified, multiplicative
///   3  + add-dot                 reweight, order k, rectified, additive
///   3a rectified -> vanilla      reweight, order k, vanilla, additive, truncate
///   4  + truncating (EPINE)      reweight, order k, rectified, additive, truncate
std::vector<AblationVariant> named_variants();
/// All 16 combinations of reweight, mask, matmul and truncation at order k.
std::vector<AblationVariant> grid_variants();

PipelineConfig apply_flags(const PipelineConfig& cfg, const AblationVariant& variant);

/// One metric row per (variant, task, seed).
std::vector<MetricRecord> ablation_run(const Graph& raw, const Labels* labels,
                                       const PipelineConfig& cfg,
                                       const std::vector<AblationVariant>& variants,
                                       const StageCache* cache = nullptr);

/// Mean and sample standard deviation of each metric, grouped by
/// (variant, task), as an aligned text table.
std::string summary_table(const std::vector<MetricRecord>& records);

}  // namespace epine
