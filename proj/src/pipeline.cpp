#include "epine/pipeline.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "epine/error.hpp"
#include "epine/hash.hpp"
#include "epine/sparse_io.hpp"

namespace epine {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ValidationError(fmt::format("config: {} expects a number, got '{}'", key, text));
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ValidationError(fmt::format("config: {} expects true/false, got '{}'", key, text));
}

std::vector<Task> parse_tasks(std::string_view text) {
  std::vector<Task> tasks;
  if (text == "none" || text.empty()) return tasks;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const Task t = parse_task(trim(text.substr(0, comma)));
    if (std::find(tasks.begin(), tasks.end(), t) == tasks.end()) tasks.push_back(t);
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
  }
  return tasks;
}

void check_unit_interval(const char* key, double v) {
  if (!(v > 0.0 && v < 1.0)) {
    throw ValidationError(fmt::format("config: {} must lie in (0, 1), got {}", key, v));
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Write to a sibling temp file and rename, so concurrent writers of the
// same key never leave a torn file behind.
template <typename Writer>
void write_atomically(const std::filesystem::path& path, Writer&& write) {
  std::filesystem::create_directories(path.parent_path());
  const auto tid = std::hash<std::thread::id>{}(std::this_thread::get_id());
  std::filesystem::path tmp = path;
  tmp += fmt::format(".tmp{:x}", tid);
  write(tmp);
  std::filesystem::rename(tmp, path);
}

}  // namespace

std::string to_string(Task task) {
  switch (task) {
    case Task::reconstruction: return "reconstruction";
    case Task::link_prediction: return "link_prediction";
    case Task::classification: return "classification";
  }
  return "?";
}

Task parse_task(std::string_view text) {
  if (text == "reconstruction") return Task::reconstruction;
  if (text == "link_prediction" || text == "link") return Task::link_prediction;
  if (text == "classification") return Task::classification;
  throw ValidationError(fmt::format("unknown task '{}'", text));
}

void PipelineConfig::set(std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "dataset") dataset = std::string(value);
  else if (key == "labels") labels = std::string(value);
  else if (key == "directed") directed = parse_bool(key, value);
  else if (key == "weighted") weighted = parse_bool(key, value);
  else if (key == "id_base") id_base = parse_number<int>(key, value);
  else if (key == "order" || key == "k") order = parse_number<int>(key, value);
  else if (key == "matmul") matmul = parse_matmul_mode(value);
  else if (key == "mask") mask = parse_mask_mode(value);
  else if (key == "reweight") reweight = parse_bool(key, value);
  else if (key == "normalize_weights") normalize_weights = parse_bool(key, value);
  else if (key == "drop_tolerance") drop_tolerance = parse_number<double>(key, value);
  else if (key == "decay") {
    DecaySchedule::parse(value);  // reject early
    decay = std::string(value);
  } else if (key == "eta") eta = parse_number<double>(key, value);
  else if (key == "alpha_source") {
    if (value == "truncated") alpha_source = AlphaSource::truncated;
    else if (value == "raw") alpha_source = AlphaSource::raw;
    else throw ValidationError(fmt::format("config: alpha_source '{}' unknown", value));
  } else if (key == "line_order") trainer.order = parse_line_order(value);
  else if (key == "dimension") trainer.dimension = parse_number<int>(key, value);
  else if (key == "samples") {
    if (value == "auto") trainer.samples.reset();
    else trainer.samples = static_cast<std::int64_t>(parse_number<double>(key, value));
  } else if (key == "samples_per_entry") trainer.samples_per_entry = parse_number<double>(key, value);
  else if (key == "max_samples") trainer.max_samples = static_cast<std::int64_t>(parse_number<double>(key, value));
  else if (key == "negatives") trainer.negatives = parse_number<int>(key, value);
  else if (key == "learning_rate") trainer.initial_learning_rate = parse_number<double>(key, value);
  else if (key == "min_learning_rate_fraction") trainer.min_learning_rate_fraction = parse_number<double>(key, value);
  else if (key == "noise_exponent") trainer.noise_exponent = parse_number<double>(key, value);
  else if (key == "both_full_width") trainer.both_full_width = parse_bool(key, value);
  else if (key == "tasks") tasks = parse_tasks(value);
  else if (key == "reconstruction_train") reconstruction_train = parse_number<double>(key, value);
  else if (key == "removal_fraction") removal_fraction = parse_number<double>(key, value);
  else if (key == "classification_train") classification_train = parse_number<double>(key, value);
  else if (key == "classification_runs") classification_runs = parse_number<int>(key, value);
  else if (key == "logistic_c") logistic_c = parse_number<double>(key, value);
  else if (key == "seeds") seeds = parse_number<int>(key, value);
  else if (key == "output") output = std::string(value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "workers") {
    workers = parse_number<int>(key, value);
    trainer.workers = workers;
  } else if (key == "variant") variant = std::string(value);
  else throw ValidationError(fmt::format("config: unknown key '{}'", key));
}

void PipelineConfig::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ValidationError(fmt::format("override '{}' is not key=value", assignment));
  }
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void PipelineConfig::validate(bool check_paths) const {
  if (order < 1) throw ValidationError("config: order must be >= 1");
  if (!(eta >= 0.0 && eta < 1.0)) throw ValidationError("config: eta must lie in [0, 1)");
  if (drop_tolerance < 0.0) throw ValidationError("config: drop_tolerance must be >= 0");
  DecaySchedule::parse(decay);
  trainer.validate();
  check_unit_interval("reconstruction_train", reconstruction_train);
  check_unit_interval("removal_fraction", removal_fraction);
  check_unit_interval("classification_train", classification_train);
  if (classification_runs < 1) throw ValidationError("config: classification_runs must be >= 1");
  if (!(logistic_c > 0.0)) throw ValidationError("config: logistic_c must be positive");
  if (seeds < 1) throw ValidationError("config: seeds must be >= 1");
  if (workers < 1) throw ValidationError("config: workers must be >= 1");
  if (id_base != -1 && id_base != 0 && id_base != 1) {
    throw ValidationError("config: id_base must be 0, 1 or -1 (detect)");
  }
  const bool wants_labels =
      std::find(tasks.begin(), tasks.end(), Task::classification) != tasks.end();
  if (check_paths) {
    if (dataset.empty()) throw ValidationError("config: dataset is not set");
    if (!std::filesystem::exists(dataset)) {
      throw ValidationError(fmt::format("dataset '{}' does not exist", dataset.string()));
    }
    if (wants_labels && labels.empty()) {
      throw ValidationError("classification needs a label file (labels=...)");
    }
    if (!labels.empty() && !std::filesystem::exists(labels)) {
      throw ValidationError(fmt::format("label file '{}' does not exist", labels.string()));
    }
  }
}

std::string PipelineConfig::to_text() const {
  std::string tasks_text;
  for (Task t : tasks) tasks_text += (tasks_text.empty() ? "" : ",") + to_string(t);
  std::string out;
  auto put = [&](std::string_view k, const auto& v) { out += fmt::format("{}={}\n", k, v); };
  put("dataset", dataset.string());
  put("labels", labels.string());
  put("directed", directed);
  put("weighted", weighted);
  put("id_base", id_base);
  put("order", order);
  put("matmul", to_string(matmul));
  put("mask", to_string(mask));
  put("reweight", reweight);
  put("normalize_weights", normalize_weights);
  put("drop_tolerance", drop_tolerance);
  put("decay", decay);
  put("eta", eta);
  put("alpha_source", alpha_source == AlphaSource::raw ? "raw" : "truncated");
  put("line_order", to_string(trainer.order));
  put("dimension", trainer.dimension);
  put("samples", trainer.samples ? std::to_string(*trainer.samples) : std::string("auto"));
  put("samples_per_entry", trainer.samples_per_entry);
  put("max_samples", trainer.max_samples);
  put("negatives", trainer.negatives);
  put("learning_rate", trainer.initial_learning_rate);
  put("min_learning_rate_fraction", trainer.min_learning_rate_fraction);
  put("noise_exponent", trainer.noise_exponent);
  put("both_full_width", trainer.both_full_width);
  put("tasks", tasks_text.empty() ? std::string("none") : tasks_text);
  put("reconstruction_train", reconstruction_train);
  put("removal_fraction", removal_fraction);
  put("classification_train", classification_train);
  put("classification_runs", classification_runs);
  put("logistic_c", logistic_c);
  put("seeds", seeds);
  put("output", output.string());
  put("seed", seed);
  put("workers", workers);
  put("variant", variant);
  return out;
}

SimilarityOptions PipelineConfig::similarity_options() const {
  return SimilarityOptions{DecaySchedule::parse(decay), eta, alpha_source};
}

ProductOptions PipelineConfig::product_options() const {
  return ProductOptions{drop_tolerance, workers};
}

PipelineConfig default_config() {
  PipelineConfig cfg;
  if (const char* env = std::getenv("EPINE_WORKERS"); env != nullptr && *env != '\0') {
    cfg.set("workers", env);
  }
  return cfg;
}

PipelineConfig parse_config(std::istream& in) {
  PipelineConfig cfg = default_config();
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string_view s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    try {
      cfg.apply_override(s);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), number);
    }
  }
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open config '{}'", path.string()));
  return parse_config(in);
}

std::uint64_t graph_fingerprint(const Graph& graph) {
  const SparseMatrix& a = graph.adjacency();
  Fnv1a h;
  h.update("graph");
  h.update_value(static_cast<std::int64_t>(a.rows()));
  h.update_value(static_cast<std::uint8_t>(graph.directed()));
  h.update_value(static_cast<std::uint8_t>(graph.weighted()));
  h.update_span(a.row_ptr());
  h.update_span(a.col_indices());
  h.update_span(a.values());
  return h.digest();
}

std::uint64_t stack_key(std::uint64_t graph_fp, const PipelineConfig& cfg) {
  Fnv1a h;
  h.update("stack");
  h.update_value(graph_fp);
  h.update_value(static_cast<std::uint8_t>(cfg.reweight));
  h.update_value(static_cast<std::uint8_t>(cfg.normalize_weights));
  h.update_value(static_cast<std::int32_t>(cfg.order));
  // Order 1 is the prepared adjacency whatever the modes say.
  h.update_value(cfg.order > 1 ? static_cast<std::uint8_t>(cfg.matmul) : std::uint8_t{0});
  h.update_value(cfg.order > 1 ? static_cast<std::uint8_t>(cfg.mask) : std::uint8_t{0});
  h.update_value(cfg.drop_tolerance);
  return h.digest();
}

std::uint64_t similarity_key(std::uint64_t stack_fp, const PipelineConfig& cfg) {
  Fnv1a h;
  h.update("similarity");
  h.update_value(stack_fp);
  h.update(DecaySchedule::parse(cfg.decay).to_string());
  h.update_value(cfg.eta);
  h.update_value(static_cast<std::uint8_t>(cfg.alpha_source));
  return h.digest();
}

std::uint64_t embedding_key(std::uint64_t similarity_fp, const PipelineConfig& cfg,
                            std::uint64_t seed) {
  const TrainConfig& t = cfg.trainer;
  Fnv1a h;
  h.update("embedding");
  h.update_value(similarity_fp);
  h.update_value(static_cast<std::uint8_t>(t.order));
  h.update_value(static_cast<std::int32_t>(t.dimension));
  h.update_value(t.samples.value_or(-1));
  h.update_value(t.samples_per_entry);
  h.update_value(t.max_samples);
  h.update_value(static_cast<std::int32_t>(t.negatives));
  h.update_value(t.initial_learning_rate);
  h.update_value(t.min_learning_rate_fraction);
  h.update_value(t.noise_exponent);
  h.update_value(static_cast<std::uint8_t>(t.both_full_width));
  // Multi-worker runs are not bit-reproducible; keep them apart.
  h.update_value(static_cast<std::uint8_t>(t.workers > 1));
  h.update_value(seed);
  return h.digest();
}

std::string hex(std::uint64_t value) { return fmt::format("{:016x}", value); }

Graph load_dataset(const PipelineConfig& cfg, IdMap* ids) {
  LoadOptions opt{cfg.directed, cfg.weighted, cfg.id_base, 0};
  LoadResult r = load_edge_list(cfg.dataset, opt);
  if (!cfg.labels.empty() && std::filesystem::exists(cfg.labels)) {
    // Nodes that only appear in the label file still get a row.
    const std::int64_t top = max_label_node_id(cfg.labels);
    const Index want = r.ids.to_internal(top) + 1;
    if (want > r.graph.num_nodes()) {
      opt.id_base = static_cast<int>(r.ids.base);
      opt.min_nodes = want;
      r = load_edge_list(cfg.dataset, opt);
    }
  }
  if (ids != nullptr) *ids = r.ids;
  return std::move(r.graph);
}

Graph prepare_graph(const Graph& raw, const PipelineConfig& cfg) {
  Graph g = raw;
  if (cfg.reweight) {
    if (g.weighted()) {
      throw ValidationError("degree reweighting needs an unweighted graph; set reweight=false");
    }
    g = reweight_by_degree(g);
  }
  if (cfg.normalize_weights && !g.adjacency().empty()) g = normalize_weights_by_max(g);
  return g;
}

StageCache::StageCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path StageCache::stack_path(std::uint64_t key, int order) const {
  return dir_ / fmt::format("stack-{}-k{}.epsm", hex(key), order);
}
std::filesystem::path StageCache::stack_manifest_path(std::uint64_t key) const {
  return dir_ / fmt::format("stack-{}.txt", hex(key));
}
std::filesystem::path StageCache::similarity_path(std::uint64_t key) const {
  return dir_ / fmt::format("similarity-{}.epsm", hex(key));
}
std::filesystem::path StageCache::embedding_path(std::uint64_t key) const {
  return dir_ / fmt::format("embedding-{}.epem", hex(key));
}

std::optional<ProximityStack> StageCache::load_stack(std::uint64_t key) const {
  std::ifstream in(stack_manifest_path(key));
  if (!in) return std::nullopt;
  ProximityStack s;
  std::string matmul, mask;
  int early = 0;
  if (!(in >> s.requested_order >> s.reached_order >> early >> matmul >> mask)) {
    throw ChecksumError(fmt::format("stack manifest {} is malformed",
                                    stack_manifest_path(key).string()));
  }
  s.early_stopped = early != 0;
  s.matmul_mode = parse_matmul_mode(matmul);
  s.mask_mode = parse_mask_mode(mask);
  for (int k = 1; k <= s.reached_order; ++k) {
    StoredMatrix m = read_matrix_binary(stack_path(key, k));
    if (m.header.fingerprint != key || m.header.order != k) {
      throw ChecksumError(fmt::format("{} does not belong to stack {}",
                                      stack_path(key, k).string(), hex(key)));
    }
    s.matrices.push_back(std::move(m.matrix));
  }
  return s;
}

void StageCache::store_stack(std::uint64_t key, const ProximityStack& stack) const {
  for (int k = 1; k <= stack.reached_order; ++k) {
    write_atomically(stack_path(key, k), [&](const std::filesystem::path& p) {
      write_matrix_binary(p, stack.order(k),
                          MatrixFileHeader{stack.matmul_mode, stack.mask_mode, k, key});
    });
  }
  // The manifest goes last; its presence marks a complete stack.
  write_atomically(stack_manifest_path(key), [&](const std::filesystem::path& p) {
    std::ofstream out(p);
    out << stack.requested_order << ' ' << stack.reached_order << ' '
        << int(stack.early_stopped) << ' ' << to_string(stack.matmul_mode) << ' '
        << to_string(stack.mask_mode) << '\n';
  });
}

std::optional<SparseMatrix> StageCache::load_similarity(std::uint64_t key) const {
  const auto path = similarity_path(key);
  if (!std::filesystem::exists(path)) return std::nullopt;
  StoredMatrix m = read_matrix_binary(path);
  if (m.header.fingerprint != key) {
    throw ChecksumError(fmt::format("{} carries fingerprint {}, expected {}", path.string(),
                                    hex(m.header.fingerprint), hex(key)));
  }
  return std::move(m.matrix);
}

void StageCache::store_similarity(std::uint64_t key, const SparseMatrix& s) const {
  write_atomically(similarity_path(key), [&](const std::filesystem::path& p) {
    write_matrix_binary(p, s, MatrixFileHeader{MatmulMode::multiplicative, MaskMode::rectified, 0, key});
  });
}

std::optional<EmbeddingMatrix> StageCache::load_embedding(std::uint64_t key) const {
  const auto path = embedding_path(key);
  if (!std::filesystem::exists(path)) return std::nullopt;
  EmbeddingMatrix e = read_embedding_binary(path);
  if (e.fingerprint != key) {
    throw ChecksumError(fmt::format("{} carries fingerprint {}, expected {}", path.string(),
                                    hex(e.fingerprint), hex(key)));
  }
  return e;
}

void StageCache::store_embedding(const EmbeddingMatrix& emb) const {
  write_atomically(embedding_path(emb.fingerprint), [&](const std::filesystem::path& p) {
    write_embedding_binary(p, emb);
  });
}

PipelineResult run_pipeline(const Graph& raw, const PipelineConfig& cfg, std::uint64_t seed,
                            const StageCache* cache) {
  cfg.validate(false);
  PipelineResult r;
  r.graph_fp = graph_fingerprint(raw);
  r.stack_fp = stack_key(r.graph_fp, cfg);
  r.similarity_fp = similarity_key(r.stack_fp, cfg);
  const std::uint64_t emb_fp = embedding_key(r.similarity_fp, cfg, seed);

  // Later stages first: a cached embedding needs nothing upstream.
  if (cache != nullptr) {
    if (auto e = cache->load_embedding(emb_fp)) {
      r.embedding = std::move(*e);
      r.timing.embedding_cached = true;
      return r;
    }
  }

  std::optional<SparseMatrix> sim;
  if (cache != nullptr) sim = cache->load_similarity(r.similarity_fp);
  if (sim) {
    r.similarity.matrix = std::move(*sim);
    r.similarity.fingerprint = r.similarity_fp;
    r.timing.similarity_cached = true;
  } else {
    std::optional<ProximityStack> stack;
    if (cache != nullptr) stack = cache->load_stack(r.stack_fp);
    if (stack) {
      r.stack = std::move(*stack);
      r.timing.proximity_cached = true;
    } else {
      const Graph g = prepare_graph(raw, cfg);
      const auto t0 = std::chrono::steady_clock::now();
      r.stack = proximity_stack(g, cfg.order, cfg.matmul, cfg.mask, cfg.product_options());
      r.timing.proximity_seconds = seconds_since(t0);
      if (cache != nullptr) cache->store_stack(r.stack_fp, r.stack);
    }
    const auto t0 = std::chrono::steady_clock::now();
    r.similarity = assemble_similarity(r.stack, cfg.similarity_options());
    r.similarity.fingerprint = r.similarity_fp;
    r.timing.similarity_seconds = seconds_since(t0);
    if (cache != nullptr) cache->store_similarity(r.similarity_fp, r.similarity.matrix);
  }

  const auto t0 = std::chrono::steady_clock::now();
  r.embedding = train(r.similarity.matrix, cfg.trainer, seed, &r.report);
  r.embedding.fingerprint = emb_fp;
  r.timing.embedding_seconds = seconds_since(t0);
  if (cache != nullptr) cache->store_embedding(r.embedding);
  return r;
}

std::string MetricRecord::to_json() const {
  nlohmann::ordered_json j;
  j["task"] = task;
  j["variant"] = variant;
  j["seed"] = seed;
  nlohmann::ordered_json m = nlohmann::ordered_json::object();
  for (const auto& [k, v] : metrics) m[k] = v;
  j["metrics"] = m;
  j["fingerprint"] = hex(fingerprint);
  return j.dump();
}

std::vector<MetricRecord> evaluate_tasks(const Graph& raw, const Labels* labels,
                                         const EmbeddingMatrix& embedding,
                                         const PipelineConfig& cfg, std::uint64_t seed,
                                         const StageCache* cache) {
  if (embedding.rows != raw.num_nodes()) {
    throw ValidationError(fmt::format("embedding has {} rows but the graph has {} nodes",
                                      embedding.rows, raw.num_nodes()));
  }
  const LogisticOptions logistic{cfg.logistic_c};
  std::vector<MetricRecord> out;
  for (Task task : cfg.tasks) {
    MetricRecord rec{to_string(task), cfg.variant, seed, {}, embedding.fingerprint};
    switch (task) {
      case Task::reconstruction:
        rec.metrics["auc"] = reconstruction_auc(raw, embedding, seed, cfg.reconstruction_train);
        break;
      case Task::link_prediction: {
        const LinkPredictionSplit split = link_prediction_split(raw, cfg.removal_fraction, seed);
        const PipelineResult reduced = run_pipeline(split.train, cfg, seed, cache);
        rec.metrics["auc"] = binary_edge_auc(reduced.embedding, split.positives, split.negatives,
                                             cfg.reconstruction_train, seed, logistic);
        rec.metrics["removed"] = static_cast<double>(split.positives.size());
        rec.fingerprint = reduced.embedding.fingerprint;
        break;
      }
      case Task::classification: {
        if (labels == nullptr) throw ValidationError("classification needs a label file");
        const F1Scores f = multilabel_f1(embedding, *labels, cfg.classification_train, seed,
                                         cfg.classification_runs, logistic, cfg.workers);
        rec.metrics["micro_f1"] = f.micro;
        rec.metrics["macro_f1"] = f.macro;
        break;
      }
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<AblationVariant> named_variants() {
  using MM = MatmulMode;
  using MK = MaskMode;
  return {
      {"LINE", {false, false, MK::rectified, MM::multiplicative, false}},
      {"1 +reweighting", {true, false, MK::rectified, MM::multiplicative, false}},
      {"2 +rectified-2nd", {true, true, MK::rectified, MM::multiplicative, false}},
      {"2a w/o-reweighting", {false, true, MK::rectified, MM::multiplicative, false}},
      {"3 +add-dot", {true, true, MK::rectified, MM::additive, false}},
      {"3a rectified->vanilla", {true, true, MK::vanilla, MM::additive, true}},
      {"4 +truncating(EPINE)", {true, true, MK::rectified, MM::additive, true}},
  };
}

std::vector<AblationVariant> grid_variants() {
  std::vector<AblationVariant> out;
  for (int bits = 0; bits < 16; ++bits) {
    AblationFlags f;
    f.high_order = true;
    f.reweight = bits & 1;
    f.mask = bits & 2 ? MaskMode::vanilla : MaskMode::rectified;
    f.matmul = bits & 4 ? MatmulMode::additive : MatmulMode::multiplicative;
    f.truncate = bits & 8;
    out.push_back({fmt::format("rw={} mask={} mm={} trunc={}", int(f.reweight),
                               to_string(f.mask), to_string(f.matmul), int(f.truncate)),
                   f});
  }
  return out;
}

PipelineConfig apply_flags(const PipelineConfig& cfg, const AblationVariant& variant) {
  const AblationFlags& f = variant.flags;
  PipelineConfig c = cfg;
  c.reweight = f.reweight;
  c.order = f.high_order ? std::max(cfg.order, 2) : 1;
  c.mask = f.mask;
  c.matmul = f.matmul;
  c.eta = f.truncate ? cfg.eta : 0.0;
  c.variant = variant.name;
  return c;
}

std::vector<MetricRecord> ablation_run(const Graph& raw, const Labels* labels,
                                       const PipelineConfig& cfg,
                                       const std::vector<AblationVariant>& variants,
                                       const StageCache* cache) {
  struct Job {
    PipelineConfig cfg;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const AblationVariant& v : variants) {
    PipelineConfig c = apply_flags(cfg, v);
    for (int s = 0; s < cfg.seeds; ++s) jobs.push_back({c, cfg.seed + static_cast<std::uint64_t>(s)});
  }
  // Jobs run side by side, each single-threaded, so every row is
  // reproducible whatever the worker count.
  const int pool = std::max(1, std::min<int>(cfg.workers, static_cast<int>(jobs.size())));
  if (pool > 1) {
    for (Job& j : jobs) {
      j.cfg.workers = 1;
      j.cfg.trainer.workers = 1;
    }
  }
  std::vector<std::vector<MetricRecord>> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        const PipelineResult r = run_pipeline(raw, jobs[i].cfg, jobs[i].seed, cache);
        results[i] = evaluate_tasks(raw, labels, r.embedding, jobs[i].cfg, jobs[i].seed, cache);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> threads;
    for (int t = 1; t < pool; ++t) threads.emplace_back(worker);
    worker();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<MetricRecord> out;
  for (auto& r : results) std::move(r.begin(), r.end(), std::back_inserter(out));
  return out;
}

std::string summary_table(const std::vector<MetricRecord>& records) {
  struct Group {
    std::string variant, task;
    std::map<std::string, std::vector<double>> values;
  };
  std::vector<Group> groups;
  for (const MetricRecord& r : records) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
      return g.variant == r.variant && g.task == r.task;
    });
    if (it == groups.end()) {
      groups.push_back({r.variant, r.task, {}});
      it = groups.end() - 1;
    }
    for (const auto& [k, v] : r.metrics) it->values[k].push_back(v);
  }
  std::size_t wv = 7, wt = 4;
  for (const Group& g : groups) {
    wv = std::max(wv, g.variant.size());
    wt = std::max(wt, g.task.size());
  }
  std::string out = fmt::format("{:<{}}  {:<{}}  metrics (mean +- sd, n)\n", "variant", wv,
                                "task", wt);
  for (const Group& g : groups) {
    std::string cells;
    for (const auto& [k, vs] : g.values) {
      const double n = static_cast<double>(vs.size());
      double mean = 0.0;
      for (double v : vs) mean += v / n;
      double var = 0.0;
      for (double v : vs) var += (v - mean) * (v - mean);
      const double sd = vs.size() > 1 ? std::sqrt(var / (n - 1)) : 0.0;
      cells += fmt::format("  {}={:.4f}+-{:.4f} (n={})", k, mean, sd, vs.size());
    }
    out += fmt::format("{:<{}}  {:<{}}{}\n", g.variant, wv, g.task, wt, cells);
  }
  return out;
}

}  // namespace epine
