#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fedshap {

/// splitmix64 finalizer; full-period bijective mixing of 64-bit values.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent generator for a tagged stream of a master seed.
/// Streams keyed by (round, client, purpose) tags make every sub-computation
/// reproducible regardless of execution order.
inline std::mt19937_64 make_rng(std::uint64_t seed,
                                std::initializer_list<std::uint64_t> stream = {}) {
  std::uint64_t h = mix64(seed);
  for (std::uint64_t s : stream) {
    h = mix64(h ^ mix64(s));
  }
  return std::mt19937_64(h);
}

}  // namespace fedshap
