#include "epine/alias_table.hpp"

#include <cmath>

#include "epine/error.hpp"

namespace epine {

AliasTable::AliasTable(std::span<const double> weights) {
  const std::size_t n = weights.size();
  if (n == 0) throw ValidationError("alias table: no outcomes");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ValidationError("alias table: weights must be non-negative and finite");
    }
    total += w;
  }
  if (!(total > 0.0)) throw ValidationError("alias table: all weights are zero");

  prob_.resize(n);
  alias_.resize(n);
  std::vector<double> scaled(n);
  std::vector<std::size_t> small;
  std::vector<std::size_t> large;
  for (std::size_t k = 0; k < n; ++k) {
    scaled[k] = weights[k] * static_cast<double>(n) / total;
    (scaled[k] < 1.0 ? small : large).push_back(k);
  }
  while (!small.empty() && !large.empty()) {
    const std::size_t s = small.back();
    small.pop_back();
    const std::size_t l = large.back();
    prob_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  // Leftovers are 1 up to rounding.
  for (std::size_t k : large) {
    prob_[k] = 1.0;
    alias_[k] = k;
  }
  for (std::size_t k : small) {
    prob_[k] = 1.0;
    alias_[k] = k;
  }
}

double AliasTable::probability(std::size_t k) const {
  const double n = static_cast<double>(prob_.size());
  double p = prob_[k] / n;
  for (std::size_t b = 0; b < prob_.size(); ++b) {
    if (b != k && alias_[b] == k) p += (1.0 - prob_[b]) / n;
  }
  return p;
}

}  // namespace epine
