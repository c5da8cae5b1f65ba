#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace splatmap {

// Deterministic draws on top of mt19937_64. The standard distribution
// classes are implementation-defined, so everything that must reproduce
// bit-exactly across toolchains goes through these.
inline double rand_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double rand_uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * rand_uniform(rng);
}

inline std::uint64_t rand_index(std::mt19937_64& rng, std::uint64_t n) {
  // Modulo bias is negligible for n << 2^64 and keeps the draw count fixed.
  return rng() % n;
}

inline double rand_normal(std::mt19937_64& rng) {
  // Box-Muller; two uniforms per draw, second value discarded.
  double u1 = rand_uniform(rng);
  double u2 = rand_uniform(rng);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace splatmap
