#include "dawn/config_io.hpp"
#include "dawn/report.hpp"
#include "dawn/trace.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

using namespace dawn;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("dawn_test_" + std::to_string(::getpid()) + "_" + name)).string();
}

std::size_t count_lines(const std::string& path) {
  std::ifstream in(path);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

}  // namespace

TEST_CASE("three-step run gives three step records and a header") {
  // one pair and one filler: fillers step, fallback, partner
  auto g = default_grammar(3, 32, 1);
  ToyOracle o(g);
  auto cfg = toy_config(g);
  const auto path = temp_path("three.jsonl");
  TraceWriter w(path, {"dawn", 4, g.prompt_length, "toy", cfg});
  DecodeOptions opts;
  opts.observer = [&](const StepRecord& r) { w.write_step(r); };
  opts.sink_reports = true;
  auto res = decode_dawn(o, cfg, 4, opts);
  REQUIRE(res.metrics.nfe == 3);
  CHECK(count_lines(path) == 4);

  auto t = read_trace(path);
  CHECK(t.header.sampler == "dawn");
  CHECK(t.header.seed == 4);
  CHECK(t.header.config.tau_low == cfg.tau_low);
  CHECK(t.header.config.gen_length == 3);
  REQUIRE(t.steps.size() == 3);
  for (const auto& s : t.steps) {
    std::vector<Position> both;
    std::set_intersection(s.anchor_part.begin(), s.anchor_part.end(), s.conflict_part.begin(), s.conflict_part.end(),
                          std::back_inserter(both));
    CHECK(both.empty());
    CHECK(s.sinks.has_value());
  }
  CHECK(t.steps[1].used_fallback);

  auto m = recompute_metrics(t, &g);
  CHECK(m.nfe == res.metrics.nfe);
  CHECK(m.tokens_committed == res.metrics.tokens_committed);
  CHECK(m.per_step_commits == res.metrics.per_step_commits);
  CHECK(m.invalid_pairs == res.metrics.invalid_pairs);
  std::remove(path.c_str());
}

TEST_CASE("header carries the non-replayable note") {
  const auto path = temp_path("note.jsonl");
  write_trace(path, {"top1", 1, 3, "toy", SamplerConfig{}}, {});
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header.find("not replayable") != std::string::npos);
  CHECK(header.find("\"format\":\"dawn-trace/1\"") != std::string::npos);
  std::remove(path.c_str());
}

TEST_CASE("recomputed metrics match the live run") {
  auto g = default_grammar();
  ToyOracle o(g);
  auto cfg = toy_config(g);
  for (auto kind : {SamplerKind::dawn, SamplerKind::top1, SamplerKind::confidence}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      std::vector<StepRecord> steps;
      DecodeOptions opts;
      opts.observer = [&](const StepRecord& r) { steps.push_back(r); };
      auto loose = cfg;
      loose.tau_high = 0.25;
      auto res = decode(kind, o, loose, seed, opts);
      const auto path = temp_path("recompute.jsonl");
      write_trace(path, {to_string(kind), seed, g.prompt_length, "toy", loose}, steps);
      auto m = recompute_metrics(read_trace(path), &g);
      CHECK(m.nfe == res.metrics.nfe);
      CHECK(m.per_step_commits == res.metrics.per_step_commits);
      CHECK(m.invalid_pairs == res.metrics.invalid_pairs);
      std::remove(path.c_str());
    }
  }
}

TEST_CASE("trace errors") {
  CHECK_THROWS_AS(read_trace("/nonexistent/trace.jsonl"), std::runtime_error);
  const auto path = temp_path("bad.jsonl");
  {
    std::ofstream out(path);
    out << "{\"type\":\"step\",\"step\":0}\n";
  }
  CHECK_THROWS_AS(read_trace(path), std::runtime_error);

  // a trace written without sink reports cannot feed the sink diagnostics
  write_trace(path, {"dawn", 1, 32, "toy", SamplerConfig{}}, {StepRecord{}});
  try {
    trace_sink_reports(read_trace(path));
    FAIL("expected missing field error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("sink_mass") != std::string::npos);
  }
  std::remove(path.c_str());
}

TEST_CASE("csv columns") {
  std::ostringstream os;
  write_csv_header(os, {"tau_low"});
  CHECK(os.str() ==
        "sampler,seed,tau_high,tau_low,tau_induced,tau_edge,tau_sink,gen_len,block_len,nfe,tokens,"
        "speedup_vs_top1,invalid_pairs,exact_match_top1,wall_ms,sweep_tau_low,status\n");
}

TEST_CASE("csv rows parse back losslessly") {
  auto g = default_grammar();
  OracleFactory make = [g] { return std::make_unique<ToyOracle>(g); };
  std::vector<SamplerConfig> grid;
  for (double lo : {0.7, 0.85}) {
    auto c = toy_config(g);
    c.tau_low = lo;
    grid.push_back(c);
  }
  const std::vector<std::string> keys{"tau_low"};
  for (const auto& row : run_comparison(make, grid, {1, 2})) {
    auto csv = make_csv_row(row, keys);
    const auto line = format_csv_row(csv);
    auto back = parse_csv_row(line, keys);
    CHECK(back.sampler == csv.sampler);
    CHECK(back.seed == csv.seed);
    CHECK(back.tau_low == csv.tau_low);
    CHECK(back.tau_edge == csv.tau_edge);
    CHECK(back.nfe == row.metrics.nfe);
    CHECK(back.tokens == row.metrics.tokens_committed);
    CHECK(back.invalid_pairs == row.metrics.invalid_pairs);
    CHECK(back.exact_match_top1 == row.metrics.exact_match_top1);
    CHECK(*back.speedup_vs_top1 == doctest::Approx(*row.speedup_vs_top1).epsilon(1e-8));
    CHECK(back.sweep == csv.sweep);
    CHECK(back.status == "ok");
    CHECK(format_csv_row(back).substr(0, 40) == line.substr(0, 40));
  }
}

TEST_CASE("csv status with commas is quoted") {
  CsvRow r;
  r.sampler = "dawn";
  r.status = "oracle-unavailable: refused, \"port\" 9000";
  const auto line = format_csv_row(r);
  auto back = parse_csv_row(line);
  CHECK(back.status == r.status);
  CHECK_FALSE(back.speedup_vs_top1.has_value());
  CHECK_FALSE(back.invalid_pairs.has_value());
  CHECK_THROWS_AS(parse_csv_row("dawn,1,2"), std::invalid_argument);
}

TEST_CASE("config text round trip and errors") {
  SamplerConfig c;
  c.tau_low = 0.725;
  c.block_length = 8;
  c.sink_filter = SinkFilter::key_only;
  c.induced_hops = 2;
  std::stringstream ss;
  write_config_text(ss, c);
  SamplerConfig back;
  auto keys = apply_config_text(ss, back);
  CHECK(keys.size() == 10);
  CHECK(back.tau_low == 0.725);
  CHECK(back.block_length == 8);
  CHECK(back.sink_filter == SinkFilter::key_only);
  CHECK(back.induced_hops == 2);

  SamplerConfig d;
  std::istringstream partial("# comment\ntau_edge = 0.1  # trailing\n\n");
  CHECK(apply_config_text(partial, d) == std::vector<std::string>{"tau_edge"});
  CHECK(d.tau_edge == 0.1);
  CHECK(d.tau_low == 0.8);

  std::istringstream unknown("tau_medium = 0.5\n");
  CHECK_THROWS_AS(apply_config_text(unknown, d), std::invalid_argument);
  std::istringstream bad("tau_low = high\n");
  CHECK_THROWS_AS(apply_config_text(bad, d), std::invalid_argument);
  std::istringstream neg("gen_length = -4\n");
  CHECK_THROWS_AS(apply_config_text(neg, d), std::invalid_argument);
}

TEST_CASE("model presets") {
  auto llada = preset("llada-8b-instruct");
  REQUIRE(llada);
  CHECK(llada->tau_induced == 0.70);
  CHECK(llada->tau_sink == 0.01);
  CHECK(llada->tau_edge == 0.07);
  CHECK(llada->tau_low == 0.8);
  CHECK(llada->tau_high == 0.9);
  CHECK(preset("llada-8b-instruct", "mbpp")->tau_low == 0.7);
  CHECK(preset("llada-1.5", "mbpp")->tau_low == 0.75);
  auto base = preset("dream-v0-base-7b", "gsm8k");
  CHECK(base->tau_induced == 0.75);
  CHECK(base->tau_sink == 0.03);
  CHECK(base->tau_edge == 0.05);
  CHECK(base->tau_low == 0.75);
  CHECK(preset("dream-v0-base-7b", "math")->tau_low == 0.8);
  CHECK(preset("dream-v0-instruct-7b")->tau_edge == 0.10);
  CHECK(preset("dream-v0-instruct-7b", "gsm8k")->tau_low == 0.8);
  CHECK_FALSE(preset("gpt-2"));
  CHECK_FALSE(preset("llada-1.5", "trivia"));
  CHECK(preset_models().size() == 4);
  for (const auto& m : preset_models()) CHECK(validate_config(*preset(m)).empty());
}
