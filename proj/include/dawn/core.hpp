#pragma once

/**
 * Shared domain types for the decoding engine.
 *
 * Positions are absolute indices into the concatenated sequence
 * [prompt | response], so a response slot r lives at position P + r.
 * MASK never appears as a token id: a response slot is either empty
 * (masked) or holds a Commit.
 */

#include <Eigen/Core>

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dawn {

using Position = Eigen::Index;

struct TokenId {
  std::uint32_t value = 0;
  auto operator<=>(const TokenId&) const = default;
};

/// Row-major so that a row is one query's attention distribution.
template <typename Scalar>
using AttentionMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Commit {
  TokenId token;
  double confidence = 0.0;  // confidence at the step the slot was committed
};

class DecodeState {
 public:
  DecodeState(std::vector<TokenId> prompt, std::size_t gen_length, std::size_t block_length);

  const std::vector<TokenId>& prompt() const { return prompt_; }
  std::size_t prompt_length() const { return prompt_.size(); }
  std::size_t gen_length() const { return response_.size(); }
  std::size_t block_length() const { return block_length_; }
  Position total_length() const { return static_cast<Position>(prompt_.size() + response_.size()); }

  Position absolute(std::size_t r) const { return static_cast<Position>(prompt_.size() + r); }
  bool is_response(Position p) const;
  std::size_t response_index(Position p) const;

  const std::optional<Commit>& slot(std::size_t r) const { return response_.at(r); }
  const std::vector<std::optional<Commit>>& slots() const { return response_; }

  /// Masked response slot at absolute position p. Prompt positions are never masked.
  bool is_masked(Position p) const;
  bool is_masked_response(std::size_t r) const { return !response_.at(r).has_value(); }

  /// Prompt token, or the committed token. Throws for masked slots.
  TokenId token_at(Position p) const;

  std::size_t masked_count() const { return masked_; }
  std::size_t committed_count() const { return response_.size() - masked_; }
  bool complete() const { return masked_ == 0; }

  std::size_t step() const { return step_; }
  void advance_step() { ++step_; }

  /// Response index of the first slot of the active block.
  std::size_t block_start() const { return block_start_; }
  std::size_t block_end() const;
  bool in_active_block(Position p) const;

  /// Masked absolute positions in the active block, ascending.
  std::vector<Position> masked_in_block() const;

  void commit(std::size_t r, TokenId token, double confidence);

  /// Moves block_start forward past every fully committed block.
  void advance_block();

  /// Final response; throws std::logic_error while any slot is masked.
  std::vector<TokenId> response_tokens() const;

 private:
  std::vector<TokenId> prompt_;
  std::vector<std::optional<Commit>> response_;
  std::size_t block_length_;
  std::size_t block_start_ = 0;
  std::size_t step_ = 0;
  std::size_t masked_;
};

/**
 * One denoising step's model output over all P+L positions.
 * Confidence is pinned to 1.0 at prompt and committed positions; top1 is only
 * meaningful at masked response positions.
 */
struct StepPrediction {
  std::vector<TokenId> top1;
  Eigen::VectorXd confidence;
  AttentionMatrix<double> attention;

  Position size() const { return confidence.size(); }
};

enum class SinkFilter {
  both,      // drop every edge incident to a sink
  key_only,  // drop only edges where the sink is the attended-to key
  off,
};

struct SamplerConfig {
  double tau_high = 0.9;
  double tau_low = 0.8;
  double tau_induced = 0.7;
  double tau_edge = 0.07;
  double tau_sink = 0.01;
  std::size_t gen_length = 256;
  std::size_t block_length = 32;
  std::size_t attn_layers = 4;
  std::size_t induced_hops = 1;
  SinkFilter sink_filter = SinkFilter::both;
};

struct ConfigViolation {
  std::string field;
  std::string message;
};

/// Every violated SamplerConfig invariant; empty means the config is valid.
std::vector<ConfigViolation> validate_config(const SamplerConfig& cfg);

/// Structural checks only (lengths, hops). Decoders accept thresholds above 1
/// as "never satisfied", which is how the degenerate samplers are expressed.
std::vector<ConfigViolation> validate_geometry(const SamplerConfig& cfg);

std::string to_string(SinkFilter f);
std::optional<SinkFilter> parse_sink_filter(const std::string& s);

enum class OracleErrc {
  unavailable,
  dimension_mismatch,
  id_mismatch,
  row_sum,
  value_range,
  protocol,
  precondition,
};

std::string to_string(OracleErrc code);

class OracleError : public std::runtime_error {
 public:
  OracleError(OracleErrc code, const std::string& what)
      : std::runtime_error(to_string(code) + ": " + what), code_(code) {}
  OracleErrc code() const { return code_; }

 private:
  OracleErrc code_;
};

/**
 * A masked-diffusion model as seen by the samplers. Implementations must be
 * deterministic in (state, seed); one session uses an oracle from one thread.
 */
class ModelOracle {
 public:
  virtual ~ModelOracle() = default;
  virtual std::vector<TokenId> prompt() const = 0;
  virtual std::size_t vocab_size() const = 0;
  virtual StepPrediction query(const DecodeState& state, std::uint64_t seed) = 0;
};

inline constexpr double kRowSumTolerance = 1e-5;

/// Shape, range, row-sum and pinned-confidence checks shared by every oracle.
void validate_prediction(const StepPrediction& pred, const DecodeState& state, std::size_t vocab_size,
                         double row_tolerance = kRowSumTolerance);

/// Checks the at-least-one-masked precondition, queries, validates.
StepPrediction oracle_query(ModelOracle& oracle, const DecodeState& state, std::uint64_t seed);

}  // namespace dawn
