#include "epine/graph.hpp"

#include <fmt/format.h>
#include <fmt/os.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <string_view>

#include "epine/error.hpp"

namespace epine {
namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' ||
                               line[i] == '\r' || line[i] == ',')) {
      ++i;
    }
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' &&
           line[i] != '\r' && line[i] != ',') {
      ++i;
    }
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool is_blank_or_comment(std::string_view line) {
  for (char c : line) {
    if (c == '#') return true;
    if (c != ' ' && c != '\t' && c != '\r') return false;
  }
  return true;
}

std::int64_t parse_id(std::string_view field, std::size_t line_no) {
  std::int64_t v = 0;
  const auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || v < 0) {
    throw ParseError("invalid node id '" + std::string(field) + "'", line_no);
  }
  return v;
}

double parse_weight(std::string_view field, std::size_t line_no) {
  double v = 0.0;
  const auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() ||
      !std::isfinite(v)) {
    throw ParseError("invalid weight '" + std::string(field) + "'", line_no);
  }
  if (v < 0.0) {
    throw ValidationError(fmt::format("line {}: negative weight {}", line_no, v));
  }
  return v;
}

struct RawEdge {
  std::int64_t src;
  std::int64_t dst;
  double weight;
};

}  // namespace

Graph::Graph(SparseMatrix adjacency, bool directed, bool weighted)
    : Graph(adjacency, directed, weighted, adjacency.row_sums()) {}

Graph::Graph(SparseMatrix adjacency, bool directed, bool weighted,
             std::vector<double> degrees)
    : adjacency_(std::move(adjacency)),
      directed_(directed),
      weighted_(weighted),
      degrees_(std::move(degrees)) {
  if (adjacency_.rows() != adjacency_.cols()) {
    throw ValidationError("graph: adjacency must be square");
  }
  if (degrees_.size() != static_cast<std::size_t>(adjacency_.rows())) {
    throw ValidationError("graph: degree vector has the wrong length");
  }
  for (Index i = 0; i < adjacency_.rows(); ++i) {
    if (adjacency_.contains(i, i)) {
      throw ValidationError("graph: self-loop at node " + std::to_string(i));
    }
  }
  if (!directed_ && !adjacency_.is_symmetric()) {
    throw ValidationError("graph: undirected adjacency is not symmetric");
  }
}

std::size_t Graph::num_edges() const noexcept {
  return directed_ ? adjacency_.nnz() : adjacency_.nnz() / 2;
}

LoadResult load_edge_list(std::istream& in, const LoadOptions& options) {
  std::vector<RawEdge> edges;
  LoadResult result;
  std::int64_t min_id = std::numeric_limits<std::int64_t>::max();
  std::int64_t max_id = -1;
  const std::size_t want_fields = options.weighted ? 3 : 2;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank_or_comment(line)) continue;
    const auto fields = split_fields(line);
    if (fields.size() != want_fields) {
      throw ParseError(fmt::format("expected {} fields, found {}", want_fields,
                                   fields.size()),
                       line_no);
    }
    RawEdge e{parse_id(fields[0], line_no), parse_id(fields[1], line_no),
              options.weighted ? parse_weight(fields[2], line_no) : 1.0};
    min_id = std::min({min_id, e.src, e.dst});
    max_id = std::max({max_id, e.src, e.dst});
    ++result.lines_read;
    if (e.src == e.dst) {
      ++result.self_loops_dropped;
      continue;
    }
    edges.push_back(e);
  }
  if (in.bad()) throw Error("I/O error while reading edge list");

  std::int64_t base = options.id_base;
  if (base < 0) base = (max_id < 0 || min_id == 0) ? 0 : 1;
  if (max_id >= 0 && min_id < base) {
    throw ValidationError(fmt::format("node id {} is below id base {}", min_id, base));
  }
  const std::int64_t n64 =
      std::max<std::int64_t>(max_id < 0 ? 0 : max_id - base + 1, options.min_nodes);
  if (n64 > std::numeric_limits<Index>::max()) {
    throw ValidationError("edge list: too many nodes");
  }
  const auto n = static_cast<Index>(n64);

  std::vector<Triplet> triplets;
  triplets.reserve(edges.size() * (options.directed ? 1 : 2));
  for (const RawEdge& e : edges) {
    const auto u = static_cast<Index>(e.src - base);
    const auto v = static_cast<Index>(e.dst - base);
    triplets.push_back({u, v, e.weight});
    if (!options.directed) triplets.push_back({v, u, e.weight});
  }
  SparseMatrix adj = SparseMatrix::from_triplets(n, n, std::move(triplets));
  if (!options.weighted) {
    adj = adj.with_values(std::vector<double>(adj.nnz(), 1.0));
  }
  if (result.self_loops_dropped > 0) {
    spdlog::warn("edge list: dropped {} self-loop line(s)",
                 result.self_loops_dropped);
  }
  result.graph = Graph(std::move(adj), options.directed, options.weighted);
  result.ids.base = base;
  return result;
}

LoadResult load_edge_list(const std::filesystem::path& path,
                          const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open edge list " + path.string());
  return load_edge_list(in, options);
}

void save_edge_list(std::ostream& out, const Graph& graph, const IdMap& ids) {
  const SparseMatrix& a = graph.adjacency();
  for (Index i = 0; i < a.rows(); ++i) {
    const RowView r = a.row(i);
    for (std::size_t p = 0; p < r.size(); ++p) {
      if (!graph.directed() && r.cols[p] < i) continue;
      if (graph.weighted()) {
        out << fmt::format("{} {} {}\n", ids.to_external(i),
                           ids.to_external(r.cols[p]), r.values[p]);
      } else {
        out << fmt::format("{} {}\n", ids.to_external(i),
                           ids.to_external(r.cols[p]));
      }
    }
  }
}

void save_edge_list(const std::filesystem::path& path, const Graph& graph,
                    const IdMap& ids) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  save_edge_list(out, graph, ids);
}

void save_id_map(const std::filesystem::path& path, const IdMap& ids,
                 Index num_nodes) {
  auto out = fmt::output_file(path.string());
  out.print("# internal external\n");
  for (Index i = 0; i < num_nodes; ++i) {
    out.print("{} {}\n", i, ids.to_external(i));
  }
}

Graph reweight_by_degree(const Graph& graph) {
  if (graph.weighted()) {
    throw ValidationError(
        "reweight_by_degree: only defined for unweighted graphs");
  }
  const SparseMatrix& a = graph.adjacency();
  const std::vector<double>& deg = graph.degrees();
  // Directed edges i->j use out-degree of i and in-degree of j, both of
  // which are at least 1 for any stored edge.
  const std::vector<double> in_deg =
      graph.directed() ? a.transposed().row_sums() : deg;
  std::vector<double> values;
  values.reserve(a.nnz());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j : a.row(i).cols) values.push_back(1.0 / (deg[i] * in_deg[j]));
  }
  return Graph(a.with_values(std::move(values)), graph.directed(), true, deg);
}

Graph normalize_weights_by_max(const Graph& graph) {
  const SparseMatrix& a = graph.adjacency();
  if (a.empty()) return graph;
  return Graph(a.scaled(1.0 / a.max_value()), graph.directed(),
               graph.weighted(), graph.degrees());
}

Labels load_labels(std::istream& in, const IdMap& ids, Index num_nodes) {
  std::vector<std::pair<Index, std::int64_t>> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank_or_comment(line)) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 2) {
      throw ParseError(
          fmt::format("expected 2 fields, found {}", fields.size()), line_no);
    }
    const std::int64_t node = parse_id(fields[0], line_no);
    const std::int64_t label = parse_id(fields[1], line_no);
    const std::int64_t internal = node - ids.base;
    if (internal < 0 || internal >= num_nodes) {
      throw ValidationError(fmt::format(
          "line {}: labelled node {} is not in the graph", line_no, node));
    }
    pairs.emplace_back(static_cast<Index>(internal), label);
  }
  if (in.bad()) throw Error("I/O error while reading labels");

  Labels out;
  std::map<std::int64_t, Index> label_index;
  for (const auto& [node, label] : pairs) label_index.emplace(label, 0);
  for (auto& [external, idx] : label_index) {
    idx = out.num_labels++;
    out.external_label_ids.push_back(external);
  }
  out.of_node.resize(static_cast<std::size_t>(num_nodes));
  for (const auto& [node, label] : pairs) {
    auto& list = out.of_node[node];
    const Index l = label_index.at(label);
    if (std::find(list.begin(), list.end(), l) == list.end()) list.push_back(l);
  }
  for (auto& list : out.of_node) std::sort(list.begin(), list.end());
  return out;
}

Labels load_labels(const std::filesystem::path& path, const IdMap& ids,
                   Index num_nodes) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open label file " + path.string());
  return load_labels(in, ids, num_nodes);
}

std::int64_t max_label_node_id(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open label file " + path.string());
  std::int64_t best = -1;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank_or_comment(line)) continue;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    best = std::max(best, parse_id(fields[0], line_no));
  }
  return best;
}

}  // namespace epine
