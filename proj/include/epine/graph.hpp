#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <vector>

#include "epine/sparse_matrix.hpp"

namespace epine {

/// Immutable graph over nodes 0..num_nodes-1.
///
/// The adjacency never holds self-loops and is exactly symmetric when the
/// graph is undirected. `degrees()` holds row sums of the adjacency for
/// loaded graphs; a degree-reweighted graph keeps the degrees of the graph
/// it was derived from.
class Graph {
 public:
  Graph() = default;

  /// Degrees are computed as adjacency row sums.
  Graph(SparseMatrix adjacency, bool directed, bool weighted);

  /// Explicit degree vector; used when derived weights should not alter the
  /// reported degrees.
  Graph(SparseMatrix adjacency, bool directed, bool weighted,
        std::vector<double> degrees);

  Index num_nodes() const noexcept { return adjacency_.rows(); }
  bool directed() const noexcept { return directed_; }
  bool weighted() const noexcept { return weighted_; }
  const SparseMatrix& adjacency() const noexcept { return adjacency_; }
  const std::vector<double>& degrees() const noexcept { return degrees_; }

  /// Stored edges; an undirected edge counts once.
  std::size_t num_edges() const noexcept;

 private:
  SparseMatrix adjacency_;
  bool directed_ = false;
  bool weighted_ = false;
  std::vector<double> degrees_;
};

/// Maps internal node ids back to the ids used in the input file.
struct IdMap {
  std::int64_t base = 0;  // internal = external - base

  std::int64_t to_external(Index internal) const noexcept {
    return internal + base;
  }
  Index to_internal(std::int64_t external) const noexcept {
    return static_cast<Index>(external - base);
  }
};

struct LoadOptions {
  bool directed = false;
  bool weighted = false;
  /// Force the id base (0 or 1); negative means detect from the minimum id.
  int id_base = -1;
  /// Minimum node count, for nodes that only appear in label files.
  Index min_nodes = 0;
};

struct LoadResult {
  Graph graph;
  IdMap ids;
  std::size_t self_loops_dropped = 0;
  std::size_t lines_read = 0;
};

/// Parses "src dst [weight]" lines. '#' starts a comment line.
///
/// Ids are shifted to 0-based: the base is 0 when the smallest id seen is 0
/// and 1 otherwise. Undirected edges are stored in both directions.
/// Weighted duplicates are summed; unweighted duplicates collapse to 1.
LoadResult load_edge_list(std::istream& in, const LoadOptions& options);
LoadResult load_edge_list(const std::filesystem::path& path,
                          const LoadOptions& options);

/// Writes the graph in the format `load_edge_list` reads. Undirected edges
/// are written once with src < dst.
void save_edge_list(std::ostream& out, const Graph& graph, const IdMap& ids);
void save_edge_list(const std::filesystem::path& path, const Graph& graph,
                    const IdMap& ids);

/// One "internal external" line per node.
void save_id_map(const std::filesystem::path& path, const IdMap& ids,
                 Index num_nodes);

/// Replaces every edge weight with 1 / (d_i * d_j) using the degrees of the
/// unweighted input. Throws ValidationError for weighted graphs.
Graph reweight_by_degree(const Graph& graph);

/// Divides all weights by the largest weight.
Graph normalize_weights_by_max(const Graph& graph);

/// Per-node label lists. Label ids are compacted to 0..num_labels-1 in
/// increasing order of the ids found in the file.
struct Labels {
  std::vector<std::vector<Index>> of_node;
  Index num_labels = 0;
  std::vector<std::int64_t> external_label_ids;
};

/// Parses "node_id label_id" lines; repeated node ids give multiple labels.
Labels load_labels(std::istream& in, const IdMap& ids, Index num_nodes);
Labels load_labels(const std::filesystem::path& path, const IdMap& ids,
                   Index num_nodes);

/// Largest node id referenced by a label file, in external numbering.
std::int64_t max_label_node_id(const std::filesystem::path& path);

}  // namespace epine
