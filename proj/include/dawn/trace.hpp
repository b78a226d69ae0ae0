#pragma once

/**
 * Run traces: a JSON header line followed by one JSON record per step.
 *
 * Traces are for inspection and metric recomputation only. They cannot be
 * replayed as an oracle: each step's model input depends on what the
 * scheduler committed earlier, so a different sampler or config would have
 * queried different states.
 */

#include "dawn/samplers.hpp"
#include "dawn/toy_oracle.hpp"

#include <fstream>
#include <string>
#include <vector>

namespace dawn {

struct TraceHeader {
  std::string sampler;
  std::uint64_t seed = 0;
  std::size_t prompt_len = 0;
  std::string oracle;
  SamplerConfig config;
};

struct Trace {
  TraceHeader header;
  std::vector<StepRecord> steps;
};

/// Streams records as they arrive; usable directly as a DecodeOptions observer.
class TraceWriter {
 public:
  TraceWriter(const std::string& path, const TraceHeader& header);
  void write_step(const StepRecord& rec);

 private:
  std::string path_;
  std::ofstream out_;
};

/// Throws std::runtime_error on I/O failure.
void write_trace(const std::string& path, const TraceHeader& header, const std::vector<StepRecord>& steps);

/// Throws std::runtime_error naming the line and field on malformed input.
Trace read_trace(const std::string& path);

/// nfe, tokens and per-step histogram from the step records; invalid pairs when a grammar is given.
RunMetrics recompute_metrics(const Trace& trace, const ToyGrammar* grammar = nullptr);

/// Per-step sink reports; throws std::runtime_error listing the absent field when a step lacks them.
std::vector<std::pair<std::size_t, SinkReport>> trace_sink_reports(const Trace& trace);

}  // namespace dawn
