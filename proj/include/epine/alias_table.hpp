#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace epine {

/// Walker/Vose alias table: O(n) construction, O(1) draws from a discrete
/// distribution proportional to non-negative weights.
class AliasTable {
 public:
  AliasTable() = default;
  /// Throws ValidationError when the weights are empty, negative,
  /// non-finite, or sum to zero.
  explicit AliasTable(std::span<const double> weights);

  std::size_t size() const noexcept { return prob_.size(); }

  /// Maps two independent uniforms in [0, 1) to an outcome index.
  std::size_t sample(double u_bucket, double u_coin) const noexcept {
    auto k = static_cast<std::size_t>(u_bucket * static_cast<double>(prob_.size()));
    if (k >= prob_.size()) k = prob_.size() - 1;
    return u_coin < prob_[k] ? k : alias_[k];
  }

  template <typename Rng>
  std::size_t operator()(Rng& rng) const {
    constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
    const double u1 = static_cast<double>(rng() >> 11) * kScale;
    const double u2 = static_cast<double>(rng() >> 11) * kScale;
    return sample(u1, u2);
  }

  /// Probability mass of outcome k implied by the table.
  double probability(std::size_t k) const;

 private:
  std::vector<double> prob_;
  std::vector<std::size_t> alias_;
};

}  // namespace epine
