/**
 * rng.hpp
 *
 * Counter-based random streams. A stream is identified by a 64-bit key and
 * produces mix64(key + i * golden_gamma) for i = 1, 2, ... (the SplitMix64
 * output function). Keys for sub-streams are derived by hashing a parent key
 * with integer tags, so any (seed, scenario, replicate, purpose) tuple maps
 * to an independent stream regardless of the order in which work executes.
 *
 * All draws are bit-exact across compilers and standard libraries: nothing
 * here goes through the implementation-defined <random> distributions.
 */

#ifndef MAIC_RNG_HPP
#define MAIC_RNG_HPP

#include <cstdint>
#include <initializer_list>

#include "maic/normal.hpp"

namespace maic {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 finalizer (Stafford variant 13).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Derive a child key from a parent key and a sequence of tags.
constexpr std::uint64_t derive_key(std::uint64_t parent,
                                   std::initializer_list<std::uint64_t> tags) noexcept {
  std::uint64_t h = mix64(parent ^ 0x6A09E667F3BCC909ULL);
  for (std::uint64_t t : tags) {
    h = mix64(h + kGoldenGamma + mix64(t + 0xBB67AE8584CAA73BULL));
  }
  return h;
}

/// Purpose tags used when deriving streams.
enum class StreamPurpose : std::uint64_t {
  IndexTrial = 1,
  CompetitorTrial = 2,
  Bootstrap = 3,
};

class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}

  constexpr std::uint64_t key() const noexcept { return key_; }

  constexpr std::uint64_t next_u64() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * kGoldenGamma);
  }

  /// Uniform on the open interval (0, 1) with 53-bit resolution.
  double uniform_open() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound) by Lemire's multiply-and-reject method.
  std::uint64_t below(std::uint64_t bound) noexcept {
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next_u64()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Standard normal by inversion of a uniform draw (one uniform per normal).
  double normal() noexcept { return standard_normal_quantile(uniform_open()); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace maic

#endif  // MAIC_RNG_HPP
