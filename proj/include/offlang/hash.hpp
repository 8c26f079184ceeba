#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace offlang {

// FNV-1a, fixed across platforms so fingerprints and derived seeds are stable.
inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

inline constexpr std::uint64_t fnv1a64(std::string_view data,
                                       std::uint64_t state = kFnvOffset) {
  for (unsigned char byte : data) {
    state ^= byte;
    state *= kFnvPrime;
  }
  return state;
}

inline constexpr std::uint64_t fnv1a64(std::uint64_t value, std::uint64_t state) {
  for (int i = 0; i < 8; ++i) {
    state ^= (value >> (8 * i)) & 0xffu;
    state *= kFnvPrime;
  }
  return state;
}

/// Incremental hasher for structured content. A separator byte is fed between
/// fields so adjacent fields cannot alias.
class HashWriter {
 public:
  HashWriter& write(std::string_view data) {
    state_ = fnv1a64(data, state_);
    sep();
    return *this;
  }
  HashWriter& write(std::uint64_t value) {
    state_ = fnv1a64(value, state_);
    sep();
    return *this;
  }
  HashWriter& write(std::int64_t value) { return write(static_cast<std::uint64_t>(value)); }
  HashWriter& write(double value) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(value));
    __builtin_memcpy(&bits, &value, sizeof(bits));
    return write(bits);
  }
  std::uint64_t finish() const { return state_; }

 private:
  void sep() {
    state_ ^= 0x1f;
    state_ *= kFnvPrime;
  }
  std::uint64_t state_ = kFnvOffset;
};

inline std::string to_hex16(std::uint64_t value) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xf];
    value >>= 4;
  }
  return out;
}

/// Stable per-stage seed derivation from a global seed and a stage tag.
inline std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view tag) {
  HashWriter h;
  h.write(global_seed).write(tag);
  return h.finish();
}

}  // namespace offlang
