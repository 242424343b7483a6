#include "epine/modes.hpp"

#include "epine/error.hpp"

namespace epine {

std::string to_string(MatmulMode mode) {
  return mode == MatmulMode::additive ? "additive" : "multiplicative";
}

std::string to_string(MaskMode mode) {
  return mode == MaskMode::vanilla ? "vanilla" : "rectified";
}

MatmulMode parse_matmul_mode(std::string_view text) {
  if (text == "multiplicative" || text == "mul") return MatmulMode::multiplicative;
  if (text == "additive" || text == "add") return MatmulMode::additive;
  throw ValidationError("unknown matmul mode '" + std::string(text) + "'");
}

MaskMode parse_mask_mode(std::string_view text) {
  if (text == "rectified") return MaskMode::rectified;
  if (text == "vanilla") return MaskMode::vanilla;
  throw ValidationError("unknown mask mode '" + std::string(text) + "'");
}

}  // namespace epine
