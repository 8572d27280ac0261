#pragma once

#include <cstdint>
#include <random>

namespace segfix {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Uniform in [0,1) from the top 53 bits.
inline double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Stateless draw in [0,1) keyed by (seed, stream, key).
inline double hash_unit(std::uint64_t seed, std::uint64_t stream, std::uint64_t key) {
  return to_unit(splitmix64(splitmix64(seed ^ splitmix64(stream)) ^ key));
}

// std distributions are implementation-defined; these keep draws identical
// across standard libraries.
inline double uniform01(Rng& rng) { return to_unit(rng()); }

inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
  return static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

inline int uniform_int(Rng& rng, int lo, int hi_inclusive) {
  return lo + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(hi_inclusive - lo + 1)));
}

}  // namespace segfix
