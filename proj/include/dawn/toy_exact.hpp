#pragma once

/**
 * Brute-force reference for the toy oracle.
 *
 * Toy confidences depend only on which slots are committed, never on the
 * sampled tokens, so every sampler's commit schedule is deterministic and
 * can be simulated directly from the grammar. Randomness enters only through
 * pairs whose two members are both committed from their marginals in the same
 * step; for those the invalid probability is summed over all k*k joint
 * outcomes of the two independent draws.
 *
 * Nothing here calls the depgraph or scheduler code: attention entries come
 * from their closed form and every selection rule is a literal set loop.
 */

#include "dawn/samplers.hpp"
#include "dawn/toy_oracle.hpp"

#include <vector>

namespace dawn {

struct ExactStep {
  std::vector<std::size_t> committed;  // response indices, ascending
  bool fallback = false;
};

struct ExactTranscript {
  SamplerKind sampler = SamplerKind::dawn;
  std::size_t nfe = 0;
  std::vector<ExactStep> steps;
  std::vector<char> pair_joint;                   // both members drawn from marginals in one step
  std::vector<double> pair_invalid_probability;   // per pair
  double expected_invalid_pairs = 0.0;
  std::vector<std::size_t> sinks;                 // absolute positions flagged as sinks
  std::size_t edge_count = 0;
};

inline constexpr std::size_t kExactMaxPairs = 8;
inline constexpr std::size_t kExactMaxGenLength = 32;

/// Probability that two independent marginal draws for pair q form an invalid combination.
double toy_pair_invalid_probability(const ToyGrammar& g, std::size_t q);

/// Throws std::length_error past kExactMaxPairs pairs or kExactMaxGenLength slots.
ExactTranscript toy_exact_oracle(const ToyGrammar& g, const SamplerConfig& cfg, SamplerKind sampler);

}  // namespace dawn
