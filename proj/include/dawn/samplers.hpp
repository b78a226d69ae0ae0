#pragma once

/**
 * Decode loops.
 *
 * All three samplers share one loop: query the oracle for the current state,
 * choose positions inside the active block, commit their top-1 tokens with
 * the confidence observed at this step, advance the block cursor. They differ
 * only in the selection rule:
 *
 *   top1        the single most confident masked position
 *   confidence  every masked position with c >= tau_high, else top1
 *   dawn        dependency graph + anchor-guided + conflict scheduling
 *
 * NFE counts oracle queries, one per step.
 */

#include "dawn/core.hpp"
#include "dawn/depgraph.hpp"
#include "dawn/scheduler.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dawn {

enum class SamplerKind { dawn, top1, confidence };

std::string to_string(SamplerKind k);
std::optional<SamplerKind> parse_sampler(const std::string& s);

struct CommitEvent {
  Position position = 0;
  TokenId token;
  double confidence = 0.0;
};

struct StepRecord {
  std::size_t step = 0;
  std::size_t block_start = 0;
  std::size_t masked_before = 0;
  std::vector<CommitEvent> commits;
  std::vector<Position> anchor_part;
  std::vector<Position> conflict_part;
  bool used_fallback = false;
  std::optional<SinkReport> sinks;  // filled when DecodeOptions::sink_reports is set
};

struct RunMetrics {
  std::size_t nfe = 0;
  std::size_t tokens_committed = 0;
  std::map<std::size_t, std::size_t> per_step_commits;  // commits-per-step -> number of steps
  std::optional<std::size_t> invalid_pairs;
  std::optional<bool> exact_match_top1;
  double wall_ms = 0.0;

  double tokens_per_step() const { return nfe == 0 ? 0.0 : static_cast<double>(tokens_committed) / nfe; }
};

/// Fills the count fields from a step sequence; used by the decoder and by trace recomputation.
void accumulate_step(RunMetrics& m, std::size_t commits);

struct DecodeResult {
  std::vector<TokenId> response;
  RunMetrics metrics;
};

struct DecodeOptions {
  std::function<void(const StepRecord&)> observer;
  bool sink_reports = false;
  std::size_t sink_top_k = 5;
};

/// Hook for oracles that can judge a finished response (the toy grammar does).
class ResponseJudge {
 public:
  virtual ~ResponseJudge() = default;
  virtual std::size_t invalid_pairs(const std::vector<TokenId>& response) const = 0;
};

DecodeResult decode(SamplerKind kind, ModelOracle& oracle, const SamplerConfig& cfg, std::uint64_t seed,
                    const DecodeOptions& opts = {});

inline DecodeResult decode_dawn(ModelOracle& oracle, const SamplerConfig& cfg, std::uint64_t seed,
                                const DecodeOptions& opts = {}) {
  return decode(SamplerKind::dawn, oracle, cfg, seed, opts);
}
inline DecodeResult decode_top1(ModelOracle& oracle, const SamplerConfig& cfg, std::uint64_t seed,
                                const DecodeOptions& opts = {}) {
  return decode(SamplerKind::top1, oracle, cfg, seed, opts);
}
inline DecodeResult decode_confidence(ModelOracle& oracle, const SamplerConfig& cfg, std::uint64_t seed,
                                      const DecodeOptions& opts = {}) {
  return decode(SamplerKind::confidence, oracle, cfg, seed, opts);
}

using OracleFactory = std::function<std::unique_ptr<ModelOracle>()>;

struct ComparisonRow {
  SamplerKind sampler = SamplerKind::dawn;
  std::uint64_t seed = 0;
  std::size_t config_index = 0;
  SamplerConfig config;
  RunMetrics metrics;
  std::optional<double> speedup_vs_top1;
  std::string error;  // empty on success

  bool ok() const { return error.empty(); }
};

/**
 * samplers x grid x seeds. Every (config, seed) cell also gets a top-1
 * reference run for the speedup and exact-match columns. Rows are ordered
 * by (sampler, config index, seed) regardless of `threads`.
 */
std::vector<ComparisonRow> run_comparison(const OracleFactory& make_oracle, const std::vector<SamplerConfig>& grid,
                                          const std::vector<std::uint64_t>& seeds,
                                          const std::vector<SamplerKind>& samplers = {SamplerKind::dawn,
                                                                                      SamplerKind::top1,
                                                                                      SamplerKind::confidence},
                                          std::size_t threads = 1);

}  // namespace dawn
