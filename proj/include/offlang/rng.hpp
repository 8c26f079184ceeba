#pragma once

#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace offlang {

/// Deterministic RNG wrapper. std::shuffle and the std distributions are
/// implementation-defined, so anything that feeds persisted artifacts goes
/// through the helpers below instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform draw in [0, n) via rejection sampling, bias-free.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    if (items.size() < 2) return;
    for (std::size_t i = items.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i + 1));
      std::swap(items[i], items[j]);
    }
  }

  /// k distinct indices drawn uniformly from [0, n), in draw order.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k) {
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    std::vector<std::size_t> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k && i < n; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(below(n - i));
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
    return out;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace offlang
