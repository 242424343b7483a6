#include "epine/similarity.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>

#include "epine/error.hpp"

namespace epine {
namespace {

double parse_real(std::string_view text) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw ValidationError("invalid decay value '" + std::string(text) + "'");
  }
  return v;
}

void check_lambda(double v) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw ValidationError("decay coefficients must be non-negative and finite");
  }
}

}  // namespace

DecaySchedule DecaySchedule::geometric(double ratio) {
  check_lambda(ratio);
  DecaySchedule s;
  s.ratio_ = ratio;
  return s;
}

DecaySchedule DecaySchedule::explicit_values(std::vector<double> values) {
  if (values.empty()) throw ValidationError("empty decay schedule");
  for (double v : values) check_lambda(v);
  DecaySchedule s;
  s.values_ = std::move(values);
  return s;
}

DecaySchedule DecaySchedule::parse(std::string_view text) {
  if (text.starts_with("geom:")) return geometric(parse_real(text.substr(5)));
  std::vector<double> values;
  while (!text.empty()) {
    const auto comma = text.find(',');
    values.push_back(parse_real(text.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return explicit_values(std::move(values));
}

std::string DecaySchedule::to_string() const {
  if (values_.empty()) return fmt::format("geom:{}", ratio_);
  return fmt::format("{}", fmt::join(values_, ","));
}

double DecaySchedule::lambda(int order) const {
  if (order < 2) throw ValidationError("decay is defined for orders >= 2");
  if (values_.empty()) return std::pow(ratio_, order - 2);
  const auto idx = std::min<std::size_t>(static_cast<std::size_t>(order - 2),
                                         values_.size() - 1);
  return values_[idx];
}

TruncationResult truncate_top(const SparseMatrix& m, double eta) {
  if (!(eta >= 0.0 && eta < 1.0)) {
    throw ValidationError(fmt::format("eta must lie in [0, 1), got {}", eta));
  }
  const double n = static_cast<double>(m.rows());
  TruncationResult out{m, static_cast<std::size_t>(std::floor(eta * n * n)),
                       std::nullopt, 0};
  if (out.target == 0) return out;
  if (out.target >= m.nnz()) {
    spdlog::warn("truncate_top: target {} reaches nnz {}; left unchanged",
                 out.target, m.nnz());
    return out;
  }

  std::vector<double> sorted(m.values().begin(), m.values().end());
  std::nth_element(sorted.begin(), sorted.begin() + (out.target - 1),
                   sorted.end(), std::greater<>());
  const double cut = sorted[out.target - 1];
  double threshold = -1.0;
  for (double v : m.values()) {
    if (v < cut) threshold = std::max(threshold, v);
  }
  if (threshold < 0.0) {
    spdlog::warn("truncate_top: no stored value below the cut {}; left unchanged",
                 cut);
    return out;
  }

  std::vector<double> values(m.values().begin(), m.values().end());
  for (double& v : values) {
    if (v > threshold) {
      v = threshold;
      ++out.clipped;
    }
  }
  out.matrix = m.with_values(std::move(values));
  out.threshold = threshold;
  return out;
}

std::pair<SparseMatrix, double> normalize_by_max(const SparseMatrix& m) {
  if (m.empty()) throw ValidationError("normalize_by_max: empty matrix");
  const double mx = m.max_value();
  std::vector<double> values(m.values().begin(), m.values().end());
  for (double& v : values) v /= mx;
  return {m.with_values(std::move(values)), mx};
}

SimilarityMatrix assemble_similarity(const ProximityStack& stack,
                                     const SimilarityOptions& options) {
  if (stack.matrices.empty()) {
    throw ValidationError("assemble_similarity: empty proximity stack");
  }
  SimilarityMatrix out;
  out.matrix = stack.matrices.front();
  for (std::size_t idx = 1; idx < stack.matrices.size(); ++idx) {
    const int order = static_cast<int>(idx) + 1;
    const SparseMatrix& raw = stack.matrices[idx];
    OrderContribution c;
    c.order = order;
    c.lambda = options.schedule.lambda(order);
    c.max_before_truncation = raw.max_value();
    if (c.lambda == 0.0 || raw.empty()) {
      out.contributions.push_back(c);
      continue;
    }
    TruncationResult t = truncate_top(raw, options.eta);
    c.threshold = t.threshold;
    c.clipped = t.clipped;
    c.max_after_truncation = t.matrix.max_value();
    const double denom = options.alpha_source == AlphaSource::truncated
                             ? c.max_after_truncation
                             : c.max_before_truncation;
    // Divide first so the largest entry maps to exactly lambda.
    std::vector<double> values(t.matrix.values().begin(),
                               t.matrix.values().end());
    for (double& v : values) v = c.lambda * (v / denom);
    out.matrix = add(out.matrix, t.matrix.with_values(std::move(values)));
    out.contributions.push_back(c);
  }
  return out;
}

}  // namespace epine
