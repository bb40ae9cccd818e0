#pragma once

#include <cmath>
#include <cstdint>

namespace vtp {

/// Counter-based splittable PRNG (splitmix64 finalizer over a keyed counter).
/// Same (seed, call sequence) gives the same stream on every platform, which
/// the deterministic-output contracts rely on. split() derives an independent
/// stream without disturbing the parent's counter.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix(seed ^ 0x9E3779B97F4A7C15ull)) {}

  std::uint64_t next_u64() {
    return mix(key_ ^ (0x9E3779B97F4A7C15ull * ++counter_));
  }

  /// Uniform double in [0, 1).
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n). Unbiased via rejection. n must be > 0.
  std::uint64_t uniform_below(std::uint64_t n) {
    const std::uint64_t rem = (0xFFFFFFFFFFFFFFFFull % n + 1) % n;
    std::uint64_t r = next_u64();
    if (rem != 0) {
      const std::uint64_t limit = 0ull - rem;  // 2^64 - rem
      while (r >= limit) r = next_u64();
    }
    return r % n;
  }

  /// Uniform integer in [lo, hi], inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(
                    uniform_below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  /// Standard normal via Box-Muller.
  double normal() {
    const double u = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double v = uniform01();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586477 * v);
  }

  /// Independent child stream identified by `stream`.
  Rng split(std::uint64_t stream) const {
    return Rng(from_key_tag{}, mix(key_ ^ mix(0xD1B54A32D192ED03ull ^ stream)));
  }

 private:
  struct from_key_tag {};
  Rng(from_key_tag, std::uint64_t key) : key_(key) {}

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace vtp
