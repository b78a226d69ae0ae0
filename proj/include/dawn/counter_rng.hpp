#pragma once

/**
 * Stateless counter-based generator used for every toy draw.
 *
 *   mix64(z):  z += 0x9E3779B97F4A7C15
 *              z  = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
 *              z  = (z ^ (z >> 27)) * 0x94D049BB133111EB
 *              return z ^ (z >> 31)                       (all mod 2^64)
 *
 *   counter_hash(seed, step, position) = mix64(mix64(mix64(seed) ^ step) ^ position)
 *   unit_uniform(h) = (h >> 11) * 2^-53                   in [0, 1)
 *
 * mix64 is the SplitMix64 output function. A draw depends only on its key,
 * so decode order, threads and sampler choice never shift the stream.
 */

#include <cstdint>
#include <span>

namespace dawn {

constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t step, std::uint64_t position) {
  return mix64(mix64(mix64(seed) ^ step) ^ position);
}

constexpr double unit_uniform(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

/// Inverse CDF: first index whose cumulative probability exceeds u; the last index absorbs rounding.
inline std::size_t inverse_cdf(std::span<const double> probs, double u) {
  double acc = 0.0;
  for (std::size_t v = 0; v < probs.size(); ++v) {
    acc += probs[v];
    if (u < acc) return v;
  }
  return probs.empty() ? 0 : probs.size() - 1;
}

}  // namespace dawn
