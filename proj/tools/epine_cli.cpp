// epine: command-line driver for the proximity -> similarity -> embedding
// -> evaluation pipeline. Every stage persists its output under the output
// directory and writes a small JSON manifest next to it.

#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "epine/error.hpp"
#include "epine/pipeline.hpp"
#include "epine/sparse_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace epine;

namespace {

// Name of the stage currently running; error messages carry it.
std::string g_stage = "config";

struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::string input;
  std::string output;
  std::string labels;
  int workers = 0;
  bool force = false;
  bool quiet = false;
};

void add_common(CLI::App* sub, CommonOptions& o) {
  sub->add_option("-c,--config", o.config, "key=value config file");
  sub->add_option("-s,--set", o.overrides, "override, key=value (repeatable)");
  sub->add_option("-i,--input", o.input, "edge list (same as dataset=...)");
  sub->add_option("-o,--out", o.output, "output directory (same as output=...)");
  sub->add_option("-l,--labels", o.labels, "label file (same as labels=...)");
  sub->add_option("-w,--workers", o.workers, "worker threads (default: $EPINE_WORKERS or 1)");
  sub->add_flag("--force", o.force, "accept artifacts whose fingerprint does not match");
  sub->add_flag("-q,--quiet", o.quiet, "warnings and errors only");
}

PipelineConfig build_config(const CommonOptions& o) {
  PipelineConfig cfg = o.config.empty() ? default_config() : load_config(o.config);
  if (!o.input.empty()) cfg.dataset = o.input;
  if (!o.output.empty()) cfg.output = o.output;
  if (!o.labels.empty()) cfg.labels = o.labels;
  for (const std::string& s : o.overrides) cfg.apply_override(s);
  if (o.workers > 0) cfg.set("workers", std::to_string(o.workers));
  return cfg;
}

void write_json(const fs::path& path, const json& j) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("missing manifest {}", path.string()));
  return json::parse(in);
}

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Context {
  PipelineConfig cfg;
  bool force = false;
  Graph raw;
  IdMap ids;
  std::optional<Labels> labels;
  std::uint64_t graph_fp = 0;
  StageCache cache{""};

  fs::path out(const std::string& name) const { return cfg.output / name; }
};

Context load_stage(const CommonOptions& o, bool needs_labels) {
  g_stage = "config";
  Context ctx;
  ctx.cfg = build_config(o);
  ctx.force = o.force;
  ctx.cfg.validate(false);
  g_stage = "load";
  if (ctx.cfg.dataset.empty()) throw ValidationError("no dataset given (--input or dataset=)");
  if (!fs::exists(ctx.cfg.dataset)) {
    throw ValidationError(fmt::format("input '{}' does not exist", ctx.cfg.dataset.string()));
  }
  ctx.raw = load_dataset(ctx.cfg, &ctx.ids);
  ctx.graph_fp = graph_fingerprint(ctx.raw);
  ctx.cache = StageCache(ctx.cfg.output / "cache");
  if (needs_labels) {
    if (ctx.cfg.labels.empty()) throw ValidationError("classification needs a label file (--labels)");
    ctx.labels = load_labels(ctx.cfg.labels, ctx.ids, ctx.raw.num_nodes());
  }
  fs::create_directories(ctx.cfg.output);
  std::ofstream(ctx.out("config.txt")) << ctx.cfg.to_text();
  json j;
  j["dataset"] = ctx.cfg.dataset.string();
  j["nodes"] = ctx.raw.num_nodes();
  j["edges"] = ctx.raw.num_edges();
  j["directed"] = ctx.raw.directed();
  j["weighted"] = ctx.raw.weighted();
  j["id_base"] = ctx.ids.base;
  j["fingerprint"] = hex(ctx.graph_fp);
  write_json(ctx.out("graph.json"), j);
  spdlog::info("loaded {} nodes, {} edges from {}", ctx.raw.num_nodes(), ctx.raw.num_edges(),
               ctx.cfg.dataset.string());
  return ctx;
}

bool wants(const PipelineConfig& cfg, Task t) {
  return std::find(cfg.tasks.begin(), cfg.tasks.end(), t) != cfg.tasks.end();
}

ProximityStack proximity_stage(const Context& ctx) {
  g_stage = "proximity";
  const std::uint64_t key = stack_key(ctx.graph_fp, ctx.cfg);
  json j;
  j["fingerprint"] = hex(key);
  j["graph_fingerprint"] = hex(ctx.graph_fp);
  ProximityStack stack;
  const auto t0 = std::chrono::steady_clock::now();
  if (auto cached = ctx.cache.load_stack(key)) {
    stack = std::move(*cached);
    j["cached"] = true;
  } else {
    const Graph g = prepare_graph(ctx.raw, ctx.cfg);
    stack = proximity_stack(g, ctx.cfg.order, ctx.cfg.matmul, ctx.cfg.mask,
                            ctx.cfg.product_options());
    ctx.cache.store_stack(key, stack);
    j["cached"] = false;
  }
  j["timing_seconds"] = since(t0);
  j["requested_order"] = stack.requested_order;
  j["reached_order"] = stack.reached_order;
  j["early_stop"] = stack.early_stopped;
  j["matmul"] = to_string(stack.matmul_mode);
  j["mask"] = to_string(stack.mask_mode);
  json orders = json::array();
  for (int k = 1; k <= stack.reached_order; ++k) {
    orders.push_back({{"order", k},
                      {"nnz", stack.order(k).nnz()},
                      {"path", ctx.cache.stack_path(key, k).string()}});
  }
  j["orders"] = orders;
  write_json(ctx.out("proximity.json"), j);
  spdlog::info("proximity: reached order {} of {}{}", stack.reached_order, stack.requested_order,
               stack.early_stopped ? " (early stop)" : "");
  return stack;
}

SparseMatrix similarity_stage(const Context& ctx) {
  const std::uint64_t skey = stack_key(ctx.graph_fp, ctx.cfg);
  const std::uint64_t key = similarity_key(skey, ctx.cfg);
  g_stage = "similarity";
  if (auto cached = ctx.cache.load_similarity(key)) {
    spdlog::info("similarity: cached {}", hex(key));
    return std::move(*cached);
  }
  const ProximityStack stack = proximity_stage(ctx);
  g_stage = "similarity";
  const auto t0 = std::chrono::steady_clock::now();
  const SimilarityMatrix sim = assemble_similarity(stack, ctx.cfg.similarity_options());
  ctx.cache.store_similarity(key, sim.matrix);
  json j;
  j["fingerprint"] = hex(key);
  j["stack_fingerprint"] = hex(skey);
  j["nnz"] = sim.matrix.nnz();
  j["decay"] = ctx.cfg.decay;
  j["eta"] = ctx.cfg.eta;
  j["timing_seconds"] = since(t0);
  json contrib = json::array();
  for (const OrderContribution& c : sim.contributions) {
    json e{{"order", c.order},
           {"lambda", c.lambda},
           {"max_before_truncation", c.max_before_truncation},
           {"max_after_truncation", c.max_after_truncation},
           {"clipped", c.clipped}};
    e["threshold"] = c.threshold ? json(*c.threshold) : json(nullptr);
    contrib.push_back(e);
  }
  j["contributions"] = contrib;
  j["path"] = ctx.cache.similarity_path(key).string();
  write_json(ctx.out("similarity.json"), j);
  spdlog::info("similarity: {} entries", sim.matrix.nnz());
  return sim.matrix;
}

EmbeddingMatrix embed_stage(const Context& ctx, std::uint64_t seed,
                            const std::string& explicit_similarity = {}) {
  const std::uint64_t skey = similarity_key(stack_key(ctx.graph_fp, ctx.cfg), ctx.cfg);
  const std::uint64_t key = embedding_key(skey, ctx.cfg, seed);
  g_stage = "embed";
  EmbeddingMatrix emb;
  TrainReport report;
  const auto t0 = std::chrono::steady_clock::now();
  bool cached = false;
  if (explicit_similarity.empty()) {
    if (auto e = ctx.cache.load_embedding(key)) {
      emb = std::move(*e);
      cached = true;
    }
  }
  if (!cached) {
    SparseMatrix s;
    if (!explicit_similarity.empty()) {
      StoredMatrix m = read_matrix_binary(explicit_similarity);
      if (m.header.fingerprint != skey && !ctx.force) {
        throw ValidationError(fmt::format(
            "{} has fingerprint {} but this config expects {}; use --force to accept",
            explicit_similarity, hex(m.header.fingerprint), hex(skey)));
      }
      s = std::move(m.matrix);
    } else {
      s = similarity_stage(ctx);
    }
    g_stage = "embed";
    emb = train(s, ctx.cfg.trainer, seed, &report);
    emb.fingerprint = key;
    ctx.cache.store_embedding(emb);
  }
  const fs::path txt = ctx.out(seed == ctx.cfg.seed ? "embedding.txt"
                                                    : fmt::format("embedding-seed{}.txt", seed));
  write_embedding_text(txt, emb, ctx.ids);
  json j;
  j["fingerprint"] = hex(key);
  j["similarity_fingerprint"] = hex(skey);
  j["seed"] = seed;
  j["rows"] = emb.rows;
  j["dim"] = emb.dim;
  j["cached"] = cached;
  j["timing_seconds"] = since(t0);
  j["path"] = ctx.cache.embedding_path(key).string();
  j["text"] = txt.string();
  if (!cached) {
    j["samples"] = report.samples;
    j["final_learning_rate"] = report.final_learning_rate;
    json curve = json::array();
    for (const auto& [p, l] : report.smoothed_loss) curve.push_back({p, l});
    j["smoothed_loss"] = curve;
  }
  if (seed == ctx.cfg.seed) write_json(ctx.out("embedding.json"), j);
  spdlog::info("embedding: {} x {} ({})", emb.rows, emb.dim, cached ? "cached" : "trained");
  return emb;
}

void append_metrics(const Context& ctx, const std::vector<MetricRecord>& records) {
  std::ofstream out(ctx.out("metrics.jsonl"), std::ios::app);
  for (const MetricRecord& r : records) out << r.to_json() << '\n';
}

std::vector<MetricRecord> evaluate_stage(const Context& ctx, const EmbeddingMatrix& emb) {
  g_stage = "evaluate";
  std::vector<MetricRecord> all;
  for (int s = 0; s < ctx.cfg.seeds; ++s) {
    const std::uint64_t seed = ctx.cfg.seed + static_cast<std::uint64_t>(s);
    auto recs = evaluate_tasks(ctx.raw, ctx.labels ? &*ctx.labels : nullptr, emb, ctx.cfg,
                               seed, &ctx.cache);
    std::move(recs.begin(), recs.end(), std::back_inserter(all));
  }
  append_metrics(ctx, all);
  return all;
}

int cmd_load(const CommonOptions& o) {
  const Context ctx = load_stage(o, false);
  fmt::print("nodes {}\nedges {}\nfingerprint {}\n", ctx.raw.num_nodes(), ctx.raw.num_edges(),
             hex(ctx.graph_fp));
  return 0;
}

int cmd_proximity(const CommonOptions& o, bool dump) {
  const Context ctx = load_stage(o, false);
  const ProximityStack s = proximity_stage(ctx);
  if (dump) {
    for (int k = 1; k <= s.reached_order; ++k) {
      write_triplets_text(ctx.out(fmt::format("order-{}.txt", k)), s.order(k));
    }
  }
  fmt::print("reached_order {}\nearly_stop {}\n", s.reached_order, s.early_stopped);
  return 0;
}

int cmd_similarity(const CommonOptions& o, bool dump) {
  const Context ctx = load_stage(o, false);
  const SparseMatrix s = similarity_stage(ctx);
  if (dump) write_triplets_text(ctx.out("similarity.txt"), s);
  fmt::print("nnz {}\n", s.nnz());
  return 0;
}

int cmd_embed(const CommonOptions& o, const std::string& similarity) {
  const Context ctx = load_stage(o, false);
  const EmbeddingMatrix e = embed_stage(ctx, ctx.cfg.seed, similarity);
  fmt::print("rows {}\ndim {}\n", e.rows, e.dim);
  return 0;
}

int cmd_evaluate(const CommonOptions& o, std::string embedding) {
  Context ctx = load_stage(o, wants(build_config(o), Task::classification));
  g_stage = "evaluate";
  const std::uint64_t expected = embedding_key(
      similarity_key(stack_key(ctx.graph_fp, ctx.cfg), ctx.cfg), ctx.cfg, ctx.cfg.seed);
  if (embedding.empty()) {
    embedding = read_json(ctx.out("embedding.json")).at("path").get<std::string>();
  }
  const EmbeddingMatrix emb = read_embedding_binary(embedding);
  if (emb.fingerprint != expected) {
    if (!ctx.force) {
      throw ValidationError(fmt::format(
          "embedding {} has fingerprint {} but this config expects {}; use --force to accept",
          embedding, hex(emb.fingerprint), hex(expected)));
    }
    spdlog::warn("evaluating embedding {} despite fingerprint mismatch", embedding);
  }
  const auto records = evaluate_stage(ctx, emb);
  fmt::print("{}", summary_table(records));
  return 0;
}

int cmd_ablate(const CommonOptions& o, bool grid, bool list) {
  const std::vector<AblationVariant> variants = grid ? grid_variants() : named_variants();
  if (list) {
    for (const AblationVariant& v : variants) {
      const AblationFlags& f = v.flags;
      fmt::print("{:<24} reweight={} order={} mask={} matmul={} truncate={}\n", v.name,
                 f.reweight, f.high_order ? "k" : "1", to_string(f.mask), to_string(f.matmul),
                 f.truncate);
    }
    return 0;
  }
  Context ctx = load_stage(o, wants(build_config(o), Task::classification));
  g_stage = "ablate";
  const auto records =
      ablation_run(ctx.raw, ctx.labels ? &*ctx.labels : nullptr, ctx.cfg, variants, &ctx.cache);
  append_metrics(ctx, records);
  fmt::print("{}", summary_table(records));
  return 0;
}

int cmd_run_all(const CommonOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  Context ctx = load_stage(o, wants(build_config(o), Task::classification));
  std::vector<MetricRecord> all;
  for (int s = 0; s < ctx.cfg.seeds; ++s) {
    const std::uint64_t seed = ctx.cfg.seed + static_cast<std::uint64_t>(s);
    const EmbeddingMatrix emb = embed_stage(ctx, seed);
    g_stage = "evaluate";
    auto recs = evaluate_tasks(ctx.raw, ctx.labels ? &*ctx.labels : nullptr, emb, ctx.cfg,
                               seed, &ctx.cache);
    std::move(recs.begin(), recs.end(), std::back_inserter(all));
  }
  append_metrics(ctx, all);
  fmt::print("{}", summary_table(all));
  spdlog::info("run-all finished in {:.1f} s", since(t0));
  return 0;
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e)) return 2;
  if (dynamic_cast<const ValidationError*>(&e)) return 2;
  if (dynamic_cast<const ChecksumError*>(&e)) return 3;
  if (dynamic_cast<const TrainingDiverged*>(&e)) return 4;
  return 1;
}

const char* kind(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e)) return "parse error";
  if (dynamic_cast<const ValidationError*>(&e)) return "validation error";
  if (dynamic_cast<const ChecksumError*>(&e)) return "checksum error";
  if (dynamic_cast<const TrainingDiverged*>(&e)) return "training diverged";
  if (dynamic_cast<const OracleOverflow*>(&e)) return "oracle overflow";
  return "error";
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("epine"));
  spdlog::set_pattern("[%H:%M:%S] [%l] %v");

  CLI::App app{"EPINE: rectified high-order proximity embeddings"};
  app.require_subcommand(1);

  CommonOptions o;
  bool dump = false, grid = false, list = false;
  std::string similarity, embedding;

  auto* load = app.add_subcommand("load", "parse an edge list and report its size");
  add_common(load, o);
  auto* prox = app.add_subcommand("proximity", "build the proximity stack");
  add_common(prox, o);
  prox->add_flag("--dump", dump, "also write order-k.txt triplet files");
  auto* sim = app.add_subcommand("similarity", "assemble the similarity matrix");
  add_common(sim, o);
  sim->add_flag("--dump", dump, "also write similarity.txt");
  auto* emb = app.add_subcommand("embed", "train node embeddings");
  add_common(emb, o);
  emb->add_option("--similarity", similarity, "train on this .epsm file instead");
  auto* ev = app.add_subcommand("evaluate", "run the configured evaluation tasks");
  add_common(ev, o);
  ev->add_option("--embedding", embedding, "evaluate this .epem file");
  auto* abl = app.add_subcommand("ablate", "run ablation variants");
  add_common(abl, o);
  abl->add_flag("--grid", grid, "all 16 flag combinations instead of the named rows");
  abl->add_flag("--list", list, "print the variants and their flags, then exit");
  auto* all = app.add_subcommand("run-all", "load, proximity, similarity, embed, evaluate");
  add_common(all, o);

  CLI11_PARSE(app, argc, argv);
  if (o.quiet) spdlog::set_level(spdlog::level::warn);

  try {
    if (*load) return cmd_load(o);
    if (*prox) return cmd_proximity(o, dump);
    if (*sim) return cmd_similarity(o, dump);
    if (*emb) return cmd_embed(o, similarity);
    if (*ev) return cmd_evaluate(o, embedding);
    if (*abl) return cmd_ablate(o, grid, list);
    if (*all) return cmd_run_all(o);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error [%s] %s: %s\n", g_stage.c_str(), kind(e), e.what());
    return exit_code(e);
  }
  return 1;
}
