#include "epine/embedding.hpp"

#include <fmt/format.h>
#include <fmt/os.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <thread>

#include "epine/error.hpp"
#include "epine/hash.hpp"

namespace epine {
namespace {

double sigmoid(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

// log(1 + exp(x)) without overflow.
double softplus(double x) noexcept {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

// -log sigmoid(score) for positives, -log sigmoid(-score) for negatives.
double term_loss(double score, int label) noexcept {
  return label == 1 ? softplus(-score) : softplus(score);
}

struct PlainAccess {
  static double load(const double& x) noexcept { return x; }
  static void store(double& x, double v) noexcept { x = v; }
};

// Shared parameters under Hogwild updates: relaxed atomics make concurrent
// row updates well defined while still allowing lost updates.
struct RelaxedAccess {
  static double load(const double& x) noexcept {
    return std::atomic_ref<double>(const_cast<double&>(x))
        .load(std::memory_order_relaxed);
  }
  static void store(double& x, double v) noexcept {
    std::atomic_ref<double>(x).store(v, std::memory_order_relaxed);
  }
};

template <typename Access>
double step_kernel(double* source, double* const* targets, const int* labels,
                   std::size_t count, int dim, double lr, double* err) {
  std::fill(err, err + dim, 0.0);
  double loss = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    double* t = targets[k];
    double score = 0.0;
    for (int c = 0; c < dim; ++c) {
      score += Access::load(source[c]) * Access::load(t[c]);
    }
    loss += term_loss(score, labels[k]);
    const double g = (labels[k] - sigmoid(score)) * lr;
    for (int c = 0; c < dim; ++c) {
      const double tc = Access::load(t[c]);
      err[c] += g * tc;
      Access::store(t[c], tc + g * Access::load(source[c]));
    }
  }
  for (int c = 0; c < dim; ++c) {
    Access::store(source[c], Access::load(source[c]) + err[c]);
  }
  return loss;
}

struct RunSpec {
  int dim;
  LineOrder order;  // first or second
  std::uint64_t seed;
};

EmbeddingMatrix initial_embedding(Index rows, int dim, bool with_context,
                                  std::mt19937_64& rng) {
  EmbeddingMatrix emb(rows, dim);
  const double half = 0.5 / dim;
  std::uniform_real_distribution<double> uni(-half, half);
  for (double& v : emb.vectors) v = uni(rng);
  if (with_context) emb.context.assign(emb.vectors.size(), 0.0);
  return emb;
}

template <typename Access>
void run_worker(const SamplerState& sampler, const TrainConfig& cfg,
                EmbeddingMatrix& emb, bool second, std::int64_t samples,
                std::uint64_t seed, TrainReport* report) {
  const int dim = emb.dim;
  std::mt19937_64 rng(seed);
  const auto k_neg = static_cast<std::size_t>(cfg.negatives);
  std::vector<double*> targets(1 + k_neg);
  std::vector<int> labels(1 + k_neg, 0);
  std::vector<double> err(static_cast<std::size_t>(dim));
  labels[0] = 1;
  double* const base = emb.vectors.data();
  double* const ctx = second ? emb.context.data() : emb.vectors.data();

  const double lr0 = cfg.initial_learning_rate;
  const double lr_floor = lr0 * cfg.min_learning_rate_fraction;
  double lr = lr0;
  double ema = std::numeric_limits<double>::quiet_NaN();
  std::int64_t last_percent = 0;

  for (std::int64_t step = 0; step < samples; ++step) {
    lr = std::max(lr0 * (1.0 - static_cast<double>(step) /
                                   static_cast<double>(samples)),
                  lr_floor);
    const std::size_t e = sampler.edges()(rng);
    const Index u = sampler.edge_source(e);
    const Index v = sampler.edge_target(e);
    targets[0] = ctx + static_cast<std::size_t>(v) * dim;
    std::size_t count = 1;
    for (std::size_t k = 0; k < k_neg; ++k) {
      const auto n = static_cast<Index>(sampler.nodes()(rng));
      if (n == v || n == u) continue;
      targets[count++] = ctx + static_cast<std::size_t>(n) * dim;
    }
    const double loss =
        step_kernel<Access>(base + static_cast<std::size_t>(u) * dim,
                            targets.data(), labels.data(), count, dim, lr,
                            err.data());
    if (!std::isfinite(loss)) {
      throw TrainingDiverged("non-finite training loss", lr, step);
    }
    ema = std::isnan(ema) ? loss : 0.999 * ema + 0.001 * loss;
    const std::int64_t percent = (step + 1) * 100 / samples;
    if (report != nullptr && percent > last_percent) {
      report->smoothed_loss.emplace_back(
          static_cast<double>(step + 1) / static_cast<double>(samples), ema);
      last_percent = percent;
    }
  }
  if (report != nullptr) report->final_learning_rate = lr;
}

EmbeddingMatrix train_single(const SparseMatrix& s, const SamplerState& sampler,
                             const TrainConfig& cfg, const RunSpec& run,
                             std::int64_t samples, TrainReport* report) {
  const bool second = run.order == LineOrder::second;
  std::mt19937_64 init_rng(run.seed);
  EmbeddingMatrix emb = initial_embedding(s.rows(), run.dim, second, init_rng);
  if (report != nullptr) report->samples += samples;

  const int workers = std::max(cfg.workers, 1);
  if (workers == 1) {
    run_worker<PlainAccess>(sampler, cfg, emb, second, samples, init_rng(),
                            report);
    return emb;
  }

  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(workers));
  for (auto& sd : seeds) sd = init_rng();
  {
    std::vector<std::jthread> threads;
    for (int w = 0; w < workers; ++w) {
      const std::int64_t share =
          samples / workers + (w < samples % workers ? 1 : 0);
      threads.emplace_back([&, w, share] {
        try {
          run_worker<RelaxedAccess>(sampler, cfg, emb, second, share, seeds[w],
                                    w == 0 ? report : nullptr);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return emb;
}

}  // namespace

std::string to_string(LineOrder order) {
  switch (order) {
    case LineOrder::first: return "first";
    case LineOrder::second: return "second";
    case LineOrder::both: return "both";
  }
  return "second";
}

LineOrder parse_line_order(std::string_view text) {
  if (text == "first" || text == "1st" || text == "1") return LineOrder::first;
  if (text == "second" || text == "2nd" || text == "2") return LineOrder::second;
  if (text == "both" || text == "1st+2nd") return LineOrder::both;
  throw ValidationError("unknown LINE order '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  if (dimension < 1) throw ValidationError("embedding dimension must be >= 1");
  if (order == LineOrder::both && !both_full_width && dimension < 2) {
    throw ValidationError("order=both with split width needs dimension >= 2");
  }
  if (samples && *samples < 0) throw ValidationError("samples must be >= 0");
  if (!(samples_per_entry > 0.0)) {
    throw ValidationError("samples_per_entry must be positive");
  }
  if (max_samples < 1) throw ValidationError("max_samples must be positive");
  if (negatives < 0) throw ValidationError("negatives must be >= 0");
  if (!(initial_learning_rate > 0.0)) {
    throw ValidationError("initial learning rate must be positive");
  }
  if (!(min_learning_rate_fraction >= 0.0 && min_learning_rate_fraction <= 1.0)) {
    throw ValidationError("min learning rate fraction must lie in [0, 1]");
  }
  if (!std::isfinite(noise_exponent)) {
    throw ValidationError("noise exponent must be finite");
  }
}

std::int64_t TrainConfig::resolved_samples(std::size_t nnz) const {
  if (samples) return *samples;
  const double want = samples_per_entry * static_cast<double>(nnz);
  return std::min<std::int64_t>(static_cast<std::int64_t>(want), max_samples);
}

SamplerState::SamplerState(const SparseMatrix& similarity,
                           double noise_exponent) {
  if (similarity.empty()) {
    throw ValidationError("similarity matrix has no stored entries");
  }
  edge_src_.reserve(similarity.nnz());
  edge_dst_.reserve(similarity.nnz());
  for (Index i = 0; i < similarity.rows(); ++i) {
    for (Index j : similarity.row(i).cols) {
      edge_src_.push_back(i);
      edge_dst_.push_back(j);
    }
  }
  edge_table_ = AliasTable(similarity.values());
  std::vector<double> node_weight = similarity.row_sums();
  for (double& w : node_weight) {
    w = w > 0.0 ? std::pow(w, noise_exponent) : 0.0;
  }
  node_table_ = AliasTable(node_weight);
}

double sample_loss(std::span<const double> source,
                   std::span<const std::span<const double>> targets,
                   std::span<const int> labels) {
  double loss = 0.0;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    double score = 0.0;
    for (std::size_t c = 0; c < source.size(); ++c) {
      score += source[c] * targets[k][c];
    }
    loss += term_loss(score, labels[k]);
  }
  return loss;
}

double sgd_step(std::span<double> source,
                std::span<const std::span<double>> targets,
                std::span<const int> labels, double learning_rate) {
  std::vector<double*> ptrs;
  ptrs.reserve(targets.size());
  for (const auto& t : targets) {
    if (t.size() != source.size()) {
      throw ValidationError("sgd_step: target width differs from source");
    }
    ptrs.push_back(t.data());
  }
  if (labels.size() != targets.size()) {
    throw ValidationError("sgd_step: one label per target required");
  }
  std::vector<double> err(source.size());
  return step_kernel<PlainAccess>(source.data(), ptrs.data(), labels.data(),
                                  ptrs.size(), static_cast<int>(source.size()),
                                  learning_rate, err.data());
}

EmbeddingMatrix train(const SparseMatrix& similarity, const TrainConfig& cfg,
                      std::uint64_t seed, TrainReport* report) {
  cfg.validate();
  const SamplerState sampler(similarity, cfg.noise_exponent);
  const std::int64_t samples = cfg.resolved_samples(similarity.nnz());
  if (report != nullptr) *report = TrainReport{};

  if (cfg.order != LineOrder::both) {
    return train_single(similarity, sampler, cfg,
                        {cfg.dimension, cfg.order, seed}, samples, report);
  }

  const int d_first = cfg.both_full_width ? cfg.dimension : cfg.dimension / 2;
  const int d_second =
      cfg.both_full_width ? cfg.dimension : cfg.dimension - d_first;
  const EmbeddingMatrix first = train_single(
      similarity, sampler, cfg, {d_first, LineOrder::first, seed}, samples,
      report);
  const EmbeddingMatrix second =
      train_single(similarity, sampler, cfg,
                   {d_second, LineOrder::second, seed ^ 0x9e3779b97f4a7c15ULL},
                   samples, nullptr);
  EmbeddingMatrix out(similarity.rows(), d_first + d_second);
  for (Index i = 0; i < out.rows; ++i) {
    auto dst = out.row(i);
    std::copy(first.row(i).begin(), first.row(i).end(), dst.begin());
    std::copy(second.row(i).begin(), second.row(i).end(),
              dst.begin() + d_first);
  }
  if (report != nullptr) report->samples = 2 * samples;
  return out;
}

double check_sample_gradient(std::span<const double> source,
                             const std::vector<std::vector<double>>& targets,
                             std::span<const int> labels, double h) {
  const std::size_t dim = source.size();
  std::vector<double> src(source.begin(), source.end());
  std::vector<std::vector<double>> tgt = targets;

  auto loss_at = [&]() {
    std::vector<std::span<const double>> views(tgt.begin(), tgt.end());
    return sample_loss(src, views, labels);
  };

  // Gradient implied by the trainer's own update with unit learning rate.
  std::vector<double> src_after = src;
  std::vector<std::vector<double>> tgt_after = tgt;
  {
    std::vector<std::span<double>> views(tgt_after.begin(), tgt_after.end());
    sgd_step(src_after, views, labels, 1.0);
  }

  double worst = 0.0;
  auto compare = [&](double analytic, double& param) {
    const double saved = param;
    param = saved + h;
    const double up = loss_at();
    param = saved - h;
    const double down = loss_at();
    param = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic - numeric) / scale);
  };
  for (std::size_t c = 0; c < dim; ++c) compare(src[c] - src_after[c], src[c]);
  for (std::size_t k = 0; k < tgt.size(); ++k) {
    for (std::size_t c = 0; c < dim; ++c) {
      compare(tgt[k][c] - tgt_after[k][c], tgt[k][c]);
    }
  }
  return worst;
}

double gradient_check(const SparseMatrix& similarity, const TrainConfig& cfg,
                      std::uint64_t seed, double h) {
  if (similarity.rows() > 10) {
    throw ValidationError("gradient_check: at most 10 nodes");
  }
  const SamplerState sampler(similarity, cfg.noise_exponent);
  std::mt19937_64 rng(seed);
  const int dim = std::clamp(cfg.dimension, 1, 4);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);

  const std::size_t e = sampler.edges()(rng);
  const Index u = sampler.edge_source(e);
  const Index v = sampler.edge_target(e);
  std::vector<Index> chosen{v};
  for (int k = 0; k < cfg.negatives * 20 &&
                  static_cast<int>(chosen.size()) < 1 + cfg.negatives;
       ++k) {
    const auto n = static_cast<Index>(sampler.nodes()(rng));
    if (n == u || std::find(chosen.begin(), chosen.end(), n) != chosen.end()) {
      continue;
    }
    chosen.push_back(n);
  }

  std::vector<double> source(static_cast<std::size_t>(dim));
  for (double& x : source) x = uni(rng);
  std::vector<std::vector<double>> targets(chosen.size(),
                                           std::vector<double>(dim));
  for (auto& t : targets) {
    for (double& x : t) x = uni(rng);
  }
  std::vector<int> labels(chosen.size(), 0);
  labels[0] = 1;
  return check_sample_gradient(source, targets, labels, h);
}

void write_embedding_text(const std::filesystem::path& path,
                          const EmbeddingMatrix& emb, const IdMap& ids) {
  auto out = fmt::output_file(path.string());
  out.print("{} {}\n", emb.rows, emb.dim);
  for (Index i = 0; i < emb.rows; ++i) {
    out.print("{}", ids.to_external(i));
    for (double v : emb.row(i)) out.print(" {}", v);
    out.print("\n");
  }
}

EmbeddingMatrix read_embedding_text(const std::filesystem::path& path,
                                    const IdMap& ids) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open embedding file " + path.string());
  std::int64_t rows = 0;
  int dim = 0;
  if (!(in >> rows >> dim) || rows < 0 || dim < 1) {
    throw ParseError("invalid embedding header", 1);
  }
  EmbeddingMatrix emb(static_cast<Index>(rows), dim);
  std::vector<char> seen(static_cast<std::size_t>(rows), 0);
  for (std::int64_t r = 0; r < rows; ++r) {
    std::int64_t id = 0;
    if (!(in >> id)) {
      throw ParseError("missing embedding row", static_cast<std::size_t>(r + 2));
    }
    const std::int64_t i = ids.to_internal(id);
    if (i < 0 || i >= rows || seen[i]) {
      throw ParseError("invalid or repeated node id " + std::to_string(id),
                       static_cast<std::size_t>(r + 2));
    }
    seen[i] = 1;
    for (double& v : emb.row(static_cast<Index>(i))) {
      if (!(in >> v)) {
        throw ParseError("short embedding row", static_cast<std::size_t>(r + 2));
      }
    }
  }
  return emb;
}

void write_embedding_binary(const std::filesystem::path& path,
                            const EmbeddingMatrix& emb) {
  std::string buf("EPEM");
  auto put = [&buf](const auto& v) {
    buf.append(reinterpret_cast<const char*>(&v), sizeof v);
  };
  put(std::uint32_t{1});
  put(static_cast<std::int64_t>(emb.rows));
  put(static_cast<std::int64_t>(emb.dim));
  put(emb.fingerprint);
  buf.append(reinterpret_cast<const char*>(emb.vectors.data()),
             emb.vectors.size() * sizeof(double));
  put(Fnv1a().update(buf.data(), buf.size()).digest());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

EmbeddingMatrix read_embedding_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  constexpr std::size_t kHeader = 4 + 4 + 8 + 8 + 8;
  if (buf.size() < kHeader + 8 || buf.compare(0, 4, "EPEM") != 0) {
    throw ChecksumError(path.string() + ": not an embedding file");
  }
  const std::size_t body = buf.size() - 8;
  std::uint64_t stored;
  std::memcpy(&stored, buf.data() + body, 8);
  if (Fnv1a().update(buf.data(), body).digest() != stored) {
    throw ChecksumError(path.string() + ": checksum mismatch");
  }
  std::uint32_t version;
  std::int64_t rows;
  std::int64_t dim;
  EmbeddingMatrix emb;
  std::memcpy(&version, buf.data() + 4, 4);
  std::memcpy(&rows, buf.data() + 8, 8);
  std::memcpy(&dim, buf.data() + 16, 8);
  std::memcpy(&emb.fingerprint, buf.data() + 24, 8);
  if (version != 1 || rows < 0 || dim < 1 ||
      body - kHeader != static_cast<std::size_t>(rows * dim) * sizeof(double)) {
    throw ChecksumError(path.string() + ": inconsistent embedding header");
  }
  const std::uint64_t fp = emb.fingerprint;
  emb = EmbeddingMatrix(static_cast<Index>(rows), static_cast<int>(dim));
  emb.fingerprint = fp;
  std::memcpy(emb.vectors.data(), buf.data() + kHeader,
              emb.vectors.size() * sizeof(double));
  return emb;
}

}  // namespace epine
