#pragma once

/**
 * Synthetic coupled-pair oracle.
 *
 * The response holds disjoint pairs (left, right) whose tokens must form one
 * of k valid combinations, like two-word poker hands, and filler slots with
 * one correct token each. While both members of a pair are masked each sees
 * only its marginal (skewed by epsilon toward one combination), so drawing
 * both in the same step often yields an invalid combination. Once one member
 * is committed the other is fully determined (confidence 1.0).
 *
 * Vocabulary layout for k pair tokens per side and F filler tokens:
 *   [0, k)          left tokens
 *   [k, 2k)         right tokens
 *   [2k, 2k + F)    filler / prompt tokens
 *
 * Attention is fixed per grammar. Row i puts background_mass spread evenly
 * over all n columns, pair_attention_mass on its partner (pair members only),
 * sink_mass on the sink column (every row, when a sink is set), and the rest
 * on itself.
 */

#include "dawn/core.hpp"
#include "dawn/samplers.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dawn {

struct ToyPair {
  std::size_t left = 0;   // response index
  std::size_t right = 0;  // response index
};

struct ToyGrammar {
  std::size_t prompt_length = 32;
  std::size_t gen_length = 32;
  std::size_t k = 4;
  std::size_t filler_vocab = 16;
  std::vector<ToyPair> pairs;
  std::vector<std::size_t> valid_joint;  // left index -> right index, a permutation of [0, k)
  std::optional<std::size_t> sink_position;
  double sink_mass = 0.3;
  double pair_attention_mass = 0.5;
  double background_mass = 0.05;
  double marginal_skew = 0.05;
  double filler_confidence = 0.95;

  std::size_t vocab_size() const { return 2 * k + filler_vocab; }
  std::size_t total_length() const { return prompt_length + gen_length; }

  TokenId left_token(std::size_t v) const { return {static_cast<std::uint32_t>(v)}; }
  TokenId right_token(std::size_t v) const { return {static_cast<std::uint32_t>(k + v)}; }
  TokenId filler_token(std::size_t r) const { return {static_cast<std::uint32_t>(2 * k + r % filler_vocab)}; }
  std::vector<TokenId> prompt() const;

  /// Index into `pairs` of the pair holding response slot r, if any.
  std::optional<std::size_t> pair_of(std::size_t r) const;
  /// Combination index the marginals of pair q lean toward.
  std::size_t favored(std::size_t q) const { return q % k; }
  /// Distribution over left combination indices; the right side is the same over valid_joint images.
  std::vector<double> marginal(std::size_t q) const;
  double marginal_confidence() const;

  /// Throws std::invalid_argument describing the first broken invariant.
  void validate() const;
};

/// 8 pairs at (2i, 2i+1), fillers elsewhere, identity valid_joint, no sink.
ToyGrammar default_grammar(std::size_t gen_length = 32, std::size_t prompt_length = 32, std::size_t n_pairs = 8);

AttentionMatrix<double> toy_attention(const ToyGrammar& g);

StepPrediction toy_predict(const DecodeState& state, const ToyGrammar& g, std::uint64_t seed);

/// Number of pairs whose committed tokens are not a valid combination.
std::size_t toy_validate(const std::vector<TokenId>& response, const ToyGrammar& g);
std::size_t toy_validate(const DecodeState& state, const ToyGrammar& g);

/// Number of filler slots holding something other than their correct token.
std::size_t toy_filler_errors(const std::vector<TokenId>& response, const ToyGrammar& g);

class ToyOracle : public ModelOracle, public ResponseJudge {
 public:
  explicit ToyOracle(ToyGrammar g);

  std::vector<TokenId> prompt() const override { return grammar_.prompt(); }
  std::size_t vocab_size() const override { return grammar_.vocab_size(); }
  StepPrediction query(const DecodeState& state, std::uint64_t seed) override;
  std::size_t invalid_pairs(const std::vector<TokenId>& response) const override {
    return toy_validate(response, grammar_);
  }

  const ToyGrammar& grammar() const { return grammar_; }

 private:
  ToyGrammar grammar_;
  AttentionMatrix<double> attention_;
};

/// Copy of `base` with gen_length taken from the grammar and block_length clipped to it.
SamplerConfig toy_config(const ToyGrammar& g, SamplerConfig base = {});

/**
 * Grammar file: one `key = value` per line, `#` starts a comment.
 *   prompt_length, gen_length, k, filler_vocab          integers
 *   sink_mass, pair_attention_mass, background_mass,
 *   marginal_skew, filler_confidence                    reals
 *   sink_position                                       integer or `none`
 *   valid_joint                                         k integers, space separated
 *   pair                                                two response indices; repeatable
 *   default_pairs                                       n: adds pairs (2i, 2i+1) for i < n
 * Unset keys keep default_grammar() values, except that pairs start empty.
 */
ToyGrammar parse_grammar(std::istream& in);
ToyGrammar load_grammar(const std::string& path);
void write_grammar(std::ostream& out, const ToyGrammar& g);

}  // namespace dawn
