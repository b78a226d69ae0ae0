#include "dawn/samplers.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <thread>

namespace dawn {

std::string to_string(SamplerKind k) {
  switch (k) {
    case SamplerKind::dawn: return "dawn";
    case SamplerKind::top1: return "top1";
    case SamplerKind::confidence: return "confidence";
  }
  return "dawn";
}

std::optional<SamplerKind> parse_sampler(const std::string& s) {
  if (s == "dawn") return SamplerKind::dawn;
  if (s == "top1") return SamplerKind::top1;
  if (s == "confidence") return SamplerKind::confidence;
  return std::nullopt;
}

void accumulate_step(RunMetrics& m, std::size_t commits) {
  ++m.nfe;
  m.tokens_committed += commits;
  ++m.per_step_commits[commits];
}

namespace {

UpdateSet select_confidence(const DecodeState& state, const StepPrediction& pred, const SamplerConfig& cfg) {
  UpdateSet u;
  for (auto i : state.masked_in_block()) {
    if (pred.confidence(i) >= cfg.tau_high) u.anchor_part.push_back(i);
  }
  if (u.anchor_part.empty()) {
    u.conflict_part.push_back(top1_position(state, pred));
    u.used_fallback = true;
  }
  return u;
}

UpdateSet select_top1(const DecodeState& state, const StepPrediction& pred) {
  UpdateSet u;
  u.conflict_part.push_back(top1_position(state, pred));
  u.used_fallback = true;
  return u;
}

}  // namespace

DecodeResult decode(SamplerKind kind, ModelOracle& oracle, const SamplerConfig& cfg, std::uint64_t seed,
                    const DecodeOptions& opts) {
  if (auto v = validate_geometry(cfg); !v.empty()) {
    throw std::invalid_argument("invalid config: " + v.front().message);
  }
  const auto start = std::chrono::steady_clock::now();

  DecodeState state(oracle.prompt(), cfg.gen_length, cfg.block_length);
  DecodeResult result;
  auto& m = result.metrics;

  while (!state.complete()) {
    const StepPrediction pred = oracle_query(oracle, state, seed);

    UpdateSet update;
    switch (kind) {
      case SamplerKind::dawn: update = select_update_set(state, pred, build_graph(pred, cfg), cfg); break;
      case SamplerKind::confidence: update = select_confidence(state, pred, cfg); break;
      case SamplerKind::top1: update = select_top1(state, pred); break;
    }

    StepRecord rec;
    rec.step = state.step();
    rec.block_start = state.block_start();
    rec.masked_before = state.masked_count();
    if (opts.sink_reports) rec.sinks = sink_report(pred.attention, cfg.tau_sink, opts.sink_top_k);

    const auto positions = update.all();
    if (positions.empty()) throw std::logic_error("decode step selected no position");
    for (auto p : positions) {
      const auto token = pred.top1[static_cast<std::size_t>(p)];
      const double c = pred.confidence(p);
      state.commit(state.response_index(p), token, c);
      rec.commits.push_back({p, token, c});
    }
    accumulate_step(m, positions.size());

    rec.anchor_part = std::move(update.anchor_part);
    rec.conflict_part = std::move(update.conflict_part);
    rec.used_fallback = update.used_fallback;
    if (opts.observer) opts.observer(rec);

    state.advance_step();
    state.advance_block();
  }

  result.response = state.response_tokens();
  if (const auto* judge = dynamic_cast<const ResponseJudge*>(&oracle)) {
    m.invalid_pairs = judge->invalid_pairs(result.response);
  }
  m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::vector<ComparisonRow> run_comparison(const OracleFactory& make_oracle, const std::vector<SamplerConfig>& grid,
                                          const std::vector<std::uint64_t>& seeds,
                                          const std::vector<SamplerKind>& samplers, std::size_t threads) {
  if (grid.empty()) throw std::invalid_argument("empty config grid");
  if (seeds.empty()) throw std::invalid_argument("no seeds");
  if (samplers.empty()) throw std::invalid_argument("no samplers");

  const std::size_t cells = grid.size() * seeds.size();
  // rows[cell][sampler index]
  std::vector<std::vector<ComparisonRow>> rows(cells);

  auto run_cell = [&](std::size_t cell) {
    const std::size_t ci = cell / seeds.size();
    const std::uint64_t seed = seeds[cell % seeds.size()];
    const auto& cfg = grid[ci];

    std::optional<DecodeResult> ref;
    std::string ref_error;
    try {
      auto oracle = make_oracle();
      ref = decode_top1(*oracle, cfg, seed);
    } catch (const std::exception& e) {
      ref_error = e.what();
    }

    auto& out = rows[cell];
    for (auto kind : samplers) {
      ComparisonRow row;
      row.sampler = kind;
      row.seed = seed;
      row.config_index = ci;
      row.config = cfg;
      try {
        DecodeResult r;
        if (kind == SamplerKind::top1 && ref) {
          r = *ref;
        } else {
          auto oracle = make_oracle();
          r = decode(kind, *oracle, cfg, seed);
        }
        row.metrics = r.metrics;
        if (ref) {
          row.speedup_vs_top1 = static_cast<double>(ref->metrics.nfe) / static_cast<double>(r.metrics.nfe);
          row.metrics.exact_match_top1 = r.response == ref->response;
        }
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      if (row.ok() && !ref) row.error = "top1 reference failed: " + ref_error;
      out.push_back(std::move(row));
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, cells));
  if (workers == 1) {
    for (std::size_t c = 0; c < cells; ++c) run_cell(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < cells; c = next++) run_cell(c);
      });
    }
  }

  std::vector<ComparisonRow> table;
  table.reserve(cells * samplers.size());
  for (std::size_t s = 0; s < samplers.size(); ++s) {
    for (std::size_t c = 0; c < cells; ++c) table.push_back(rows[c][s]);
  }
  return table;
}

}  // namespace dawn
