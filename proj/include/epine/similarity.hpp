#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "epine/proximity.hpp"
#include "epine/sparse_matrix.hpp"

namespace epine {

/// Decay coefficient per proximity order (orders >= 2).
///
/// Either geometric, lambda_i = ratio^(i-2), or an explicit list starting at
/// order 2 whose last value repeats for higher orders. A zero coefficient
/// omits that order from the similarity.
class DecaySchedule {
 public:
  DecaySchedule() = default;  // geometric with ratio 0.1

  static DecaySchedule geometric(double ratio);
  static DecaySchedule explicit_values(std::vector<double> values);

  /// "geom:0.1" or a comma-separated list such as "1,0.1,0.01".
  static DecaySchedule parse(std::string_view text);
  std::string to_string() const;

  double lambda(int order) const;

 private:
  double ratio_ = 0.1;
  std::vector<double> values_;
};

struct TruncationResult {
  SparseMatrix matrix;
  /// Number of largest entries targeted: floor(eta * rows^2).
  std::size_t target = 0;
  /// Value every clipped entry was set to; empty when nothing was clipped.
  std::optional<double> threshold;
  std::size_t clipped = 0;
};

/// Clips the floor(eta * rows^2) largest stored values to the largest stored
/// value strictly below the cut. All entries tied with the value at the cut
/// are clipped together. The pattern never changes. When the target count
/// reaches nnz or no smaller value exists, the matrix is returned unchanged
/// with a warning. Throws ValidationError unless 0 <= eta < 1.
TruncationResult truncate_top(const SparseMatrix& m, double eta);

/// Returns (m / max(m), max(m)). Throws ValidationError for an empty matrix.
std::pair<SparseMatrix, double> normalize_by_max(const SparseMatrix& m);

enum class AlphaSource : std::uint8_t {
  /// alpha_i from the maximum after truncation.
  truncated = 0,
  /// alpha_i from the maximum before truncation.
  raw = 1,
};

struct SimilarityOptions {
  DecaySchedule schedule;
  double eta = 11e-4;
  AlphaSource alpha_source = AlphaSource::truncated;
};

struct OrderContribution {
  int order = 0;
  double lambda = 0.0;
  double max_before_truncation = 0.0;
  double max_after_truncation = 0.0;
  std::optional<double> threshold;
  std::size_t clipped = 0;
};

struct SimilarityMatrix {
  SparseMatrix matrix;
  std::vector<OrderContribution> contributions;  // orders 2..m
  std::uint64_t fingerprint = 0;
};

/// S = A1 + sum_{i>=2} lambda_i * T_i / max(T_i), where T_i is order i after
/// truncation. Order 1 passes through untouched.
SimilarityMatrix assemble_similarity(const ProximityStack& stack,
                                     const SimilarityOptions& options);

}  // namespace epine
