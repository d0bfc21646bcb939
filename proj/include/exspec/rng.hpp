#pragma once

// Counter-based seeding: every random draw in the library is a pure function
// of (seed, stream, index), so trials can be generated in any order or on any
// worker and still reproduce bit-for-bit.

#include <cmath>
#include <cstdint>
#include <random>

namespace exspec {

using Engine = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Independent uses of one experiment seed.
enum class Stream : std::uint64_t {
  kEnsemble = 1,
  kRelabel = 2,
  kSubset = 3,
  kCorner = 4,
  kBase = 5,
  kPermutation = 6,
  kSolver = 7,
  kCorpus = 8,
};

inline std::uint64_t stream_key(std::uint64_t seed, Stream stream,
                                std::uint64_t index) noexcept {
  std::uint64_t k = splitmix64(seed);
  k = splitmix64(k ^ (static_cast<std::uint64_t>(stream) * 0xD6E8FEB86659FD93ULL));
  return splitmix64(k ^ index);
}

inline Engine make_engine(std::uint64_t seed, Stream stream, std::uint64_t index) {
  return Engine(stream_key(seed, stream, index));
}

/// Uniform integer in [0, bound) by Lemire's multiply-and-reject; bound > 0.
inline std::uint64_t uniform_below(Engine& eng, std::uint64_t bound) {
  __uint128_t m = static_cast<__uint128_t>(eng()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = -bound % bound;
    while (low < threshold) {
      m = static_cast<__uint128_t>(eng()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Engine& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

/// Standard normal via the Marsaglia polar method (portable, unlike
/// std::normal_distribution whose output is implementation-defined).
inline double standard_normal(Engine& eng) {
  for (;;) {
    const double x = 2.0 * uniform01(eng) - 1.0;
    const double y = 2.0 * uniform01(eng) - 1.0;
    const double s = x * x + y * y;
    if (s > 0.0 && s < 1.0) return x * std::sqrt(-2.0 * std::log(s) / s);
  }
}

}  // namespace exspec
