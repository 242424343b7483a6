#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>
#include <type_traits>

namespace epine {

/// 64-bit FNV-1a. Used for artifact checksums and config fingerprints.
class Fnv1a {
 public:
  Fnv1a& update(const void* data, std::size_t size) noexcept {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      state_ ^= bytes[i];
      state_ *= 0x100000001b3ULL;
    }
    return *this;
  }

  Fnv1a& update(std::string_view text) noexcept {
    // Length prefix keeps ("ab","c") distinct from ("a","bc").
    const std::uint64_t n = text.size();
    update(&n, sizeof n);
    return update(text.data(), text.size());
  }

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  Fnv1a& update_value(const T& value) noexcept {
    return update(&value, sizeof(T));
  }

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  Fnv1a& update_span(std::span<const T> values) noexcept {
    return update(values.data(), values.size_bytes());
  }

  std::uint64_t digest() const noexcept { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace epine
