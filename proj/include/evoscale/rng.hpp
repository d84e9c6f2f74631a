#pragma once

#include <cstdint>

namespace evoscale {

// SplitMix64 finalizer. Used both as the mixing core of CounterRng and as the
// seed-derivation hash for per-trajectory / per-batch streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Derives a child stream key from a parent key and an index. Stable across
// platforms; all reproducibility guarantees hang off this function.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
  return splitmix64(parent ^ splitmix64(index + 0xA5A5A5A5A5A5A5A5ull));
}

// Counter-based generator built on SplitMix64: the n-th output is a pure
// function of (key, n), so independent streams are cheap and simulations can
// be partitioned across threads without shared state.
class CounterRng {
 public:
  CounterRng() = default;
  explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0)
      : key_(key), counter_(counter) {}

  std::uint64_t next_u64() { return splitmix64(key_ + counter_++ * 0x9E3779B97F4A7C15ull); }

  // Uniform in [0, 1) with 53 bits of precision.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased uniform integer in [0, bound) via rejection.
  std::uint64_t next_below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % bound;
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_ = 0x853C49E6748FEA9Bull;
  std::uint64_t counter_ = 0;
};

}  // namespace evoscale
