#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace epine {

/// How a path's cost combines edge weights: chain product or chain sum.
enum class MatmulMode : std::uint8_t { multiplicative = 0, additive = 1 };

/// rectified keeps only shortest-path endpoints; vanilla keeps every walk.
enum class MaskMode : std::uint8_t { rectified = 0, vanilla = 1 };

std::string to_string(MatmulMode mode);
std::string to_string(MaskMode mode);
MatmulMode parse_matmul_mode(std::string_view text);
MaskMode parse_mask_mode(std::string_view text);

}  // namespace epine
