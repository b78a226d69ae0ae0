#include "dawn/core.hpp"

#include <algorithm>
#include <cmath>

namespace dawn {

DecodeState::DecodeState(std::vector<TokenId> prompt, std::size_t gen_length, std::size_t block_length)
    : prompt_(std::move(prompt)), response_(gen_length), block_length_(block_length), masked_(gen_length) {
  if (gen_length == 0) throw std::invalid_argument("gen_length must be >= 1");
  if (block_length == 0) throw std::invalid_argument("block_length must be >= 1");
}

bool DecodeState::is_response(Position p) const {
  return p >= static_cast<Position>(prompt_.size()) && p < total_length();
}

std::size_t DecodeState::response_index(Position p) const {
  if (!is_response(p)) throw std::out_of_range("position " + std::to_string(p) + " is not a response slot");
  return static_cast<std::size_t>(p) - prompt_.size();
}

bool DecodeState::is_masked(Position p) const {
  return is_response(p) && !response_[response_index(p)].has_value();
}

TokenId DecodeState::token_at(Position p) const {
  if (p < 0 || p >= total_length()) throw std::out_of_range("position out of range");
  if (static_cast<std::size_t>(p) < prompt_.size()) return prompt_[static_cast<std::size_t>(p)];
  const auto& s = response_[response_index(p)];
  if (!s) throw std::logic_error("token_at on masked slot " + std::to_string(p));
  return s->token;
}

std::size_t DecodeState::block_end() const {
  return std::min(block_start_ + block_length_, response_.size());
}

bool DecodeState::in_active_block(Position p) const {
  if (!is_response(p)) return false;
  const auto r = response_index(p);
  return r >= block_start_ && r < block_end();
}

std::vector<Position> DecodeState::masked_in_block() const {
  std::vector<Position> out;
  for (std::size_t r = block_start_; r < block_end(); ++r) {
    if (!response_[r]) out.push_back(absolute(r));
  }
  return out;
}

void DecodeState::commit(std::size_t r, TokenId token, double confidence) {
  auto& s = response_.at(r);
  if (s) throw std::logic_error("slot " + std::to_string(r) + " already committed");
  if (!(confidence >= 0.0 && confidence <= 1.0)) throw std::invalid_argument("commit confidence outside [0,1]");
  if (r < block_start_ || r >= block_end()) {
    throw std::logic_error("commit outside the active block at slot " + std::to_string(r));
  }
  s = Commit{token, confidence};
  --masked_;
}

void DecodeState::advance_block() {
  while (block_start_ < response_.size()) {
    const auto end = block_end();
    const bool done = std::all_of(response_.begin() + static_cast<std::ptrdiff_t>(block_start_),
                                  response_.begin() + static_cast<std::ptrdiff_t>(end),
                                  [](const auto& s) { return s.has_value(); });
    if (!done) break;
    block_start_ += block_length_;
  }
}

std::vector<TokenId> DecodeState::response_tokens() const {
  std::vector<TokenId> out;
  out.reserve(response_.size());
  for (const auto& s : response_) {
    if (!s) throw std::logic_error("response still has masked slots");
    out.push_back(s->token);
  }
  return out;
}

namespace {

void check_unit(std::vector<ConfigViolation>& out, const char* field, double v) {
  if (!(v >= 0.0 && v <= 1.0)) out.push_back({field, std::string(field) + " in [0,1]"});
}

}  // namespace

std::vector<ConfigViolation> validate_geometry(const SamplerConfig& cfg) {
  std::vector<ConfigViolation> out;
  if (cfg.gen_length < 1) out.push_back({"gen_length", "gen_length >= 1"});
  if (cfg.block_length < 1) out.push_back({"block_length", "block_length >= 1"});
  if (cfg.gen_length >= 1 && cfg.block_length > cfg.gen_length) {
    out.push_back({"block_length", "block_length <= gen_length"});
  }
  if (cfg.attn_layers < 1) out.push_back({"attn_layers", "attn_layers >= 1"});
  if (cfg.induced_hops < 1) out.push_back({"induced_hops", "induced_hops >= 1"});
  return out;
}

std::vector<ConfigViolation> validate_config(const SamplerConfig& cfg) {
  std::vector<ConfigViolation> out;
  check_unit(out, "tau_high", cfg.tau_high);
  check_unit(out, "tau_low", cfg.tau_low);
  check_unit(out, "tau_induced", cfg.tau_induced);
  check_unit(out, "tau_edge", cfg.tau_edge);
  check_unit(out, "tau_sink", cfg.tau_sink);
  if (cfg.tau_low > cfg.tau_high) out.push_back({"tau_low", "tau_low <= tau_high"});
  if (cfg.tau_induced > cfg.tau_high) out.push_back({"tau_induced", "tau_induced <= tau_high"});
  auto geo = validate_geometry(cfg);
  out.insert(out.end(), geo.begin(), geo.end());
  return out;
}

std::string to_string(SinkFilter f) {
  switch (f) {
    case SinkFilter::both: return "both";
    case SinkFilter::key_only: return "key";
    case SinkFilter::off: return "off";
  }
  return "both";
}

std::optional<SinkFilter> parse_sink_filter(const std::string& s) {
  if (s == "both") return SinkFilter::both;
  if (s == "key" || s == "key_only") return SinkFilter::key_only;
  if (s == "off" || s == "none") return SinkFilter::off;
  return std::nullopt;
}

std::string to_string(OracleErrc code) {
  switch (code) {
    case OracleErrc::unavailable: return "oracle-unavailable";
    case OracleErrc::dimension_mismatch: return "dimension-mismatch";
    case OracleErrc::id_mismatch: return "id-mismatch";
    case OracleErrc::row_sum: return "row-sum";
    case OracleErrc::value_range: return "value-range";
    case OracleErrc::protocol: return "protocol";
    case OracleErrc::precondition: return "precondition";
  }
  return "unknown";
}

void validate_prediction(const StepPrediction& pred, const DecodeState& state, std::size_t vocab_size,
                         double row_tolerance) {
  const Position n = state.total_length();
  if (pred.confidence.size() != n || static_cast<Position>(pred.top1.size()) != n) {
    throw OracleError(OracleErrc::dimension_mismatch,
                      "expected " + std::to_string(n) + " positions, got conf=" +
                          std::to_string(pred.confidence.size()) + " top1=" + std::to_string(pred.top1.size()));
  }
  if (pred.attention.rows() != n || pred.attention.cols() != n) {
    throw OracleError(OracleErrc::dimension_mismatch,
                      "attention is " + std::to_string(pred.attention.rows()) + "x" +
                          std::to_string(pred.attention.cols()) + ", expected " + std::to_string(n) + "x" +
                          std::to_string(n));
  }
  if (!((pred.attention.array() >= 0.0).all() && (pred.attention.array() <= 1.0).all())) {
    throw OracleError(OracleErrc::value_range, "attention entry outside [0,1]");
  }
  if (!((pred.confidence.array() >= 0.0).all() && (pred.confidence.array() <= 1.0).all())) {
    throw OracleError(OracleErrc::value_range, "confidence outside [0,1]");
  }
  const Eigen::VectorXd sums = pred.attention.rowwise().sum();
  for (Position i = 0; i < n; ++i) {
    if (std::abs(sums(i) - 1.0) > row_tolerance) {
      throw OracleError(OracleErrc::row_sum,
                        "attention row " + std::to_string(i) + " sums to " + std::to_string(sums(i)));
    }
  }
  for (Position p = 0; p < n; ++p) {
    if (state.is_masked(p)) {
      if (pred.top1[static_cast<std::size_t>(p)].value >= vocab_size) {
        throw OracleError(OracleErrc::value_range, "top1 token at " + std::to_string(p) + " outside vocabulary");
      }
    } else if (pred.confidence(p) != 1.0) {
      throw OracleError(OracleErrc::value_range,
                        "confidence at unmasked position " + std::to_string(p) + " is not 1.0");
    }
  }
}

StepPrediction oracle_query(ModelOracle& oracle, const DecodeState& state, std::uint64_t seed) {
  if (state.complete()) throw OracleError(OracleErrc::precondition, "state has no masked slot");
  auto pred = oracle.query(state, seed);
  validate_prediction(pred, state, oracle.vocab_size());
  return pred;
}

}  // namespace dawn
