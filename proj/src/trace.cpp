#include "dawn/trace.hpp"

#include <json.hpp>

namespace dawn {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "dawn-trace/1";

json config_json(const SamplerConfig& c) {
  return {{"tau_high", c.tau_high},         {"tau_low", c.tau_low},           {"tau_induced", c.tau_induced},
          {"tau_edge", c.tau_edge},         {"tau_sink", c.tau_sink},         {"gen_length", c.gen_length},
          {"block_length", c.block_length}, {"attn_layers", c.attn_layers},   {"induced_hops", c.induced_hops},
          {"sink_filter", to_string(c.sink_filter)}};
}

SamplerConfig config_from(const json& j) {
  SamplerConfig c;
  c.tau_high = j.at("tau_high").get<double>();
  c.tau_low = j.at("tau_low").get<double>();
  c.tau_induced = j.at("tau_induced").get<double>();
  c.tau_edge = j.at("tau_edge").get<double>();
  c.tau_sink = j.at("tau_sink").get<double>();
  c.gen_length = j.at("gen_length").get<std::size_t>();
  c.block_length = j.at("block_length").get<std::size_t>();
  c.attn_layers = j.at("attn_layers").get<std::size_t>();
  c.induced_hops = j.at("induced_hops").get<std::size_t>();
  c.sink_filter = parse_sink_filter(j.at("sink_filter").get<std::string>()).value_or(SinkFilter::both);
  return c;
}

json header_json(const TraceHeader& h) {
  return {{"type", "header"},
          {"format", kFormat},
          {"note", "inspection only; not replayable as an oracle"},
          {"sampler", h.sampler},
          {"seed", h.seed},
          {"prompt_len", h.prompt_len},
          {"oracle", h.oracle},
          {"config", config_json(h.config)}};
}

json step_json(const StepRecord& r) {
  json commits = json::array();
  for (const auto& c : r.commits) commits.push_back({c.position, c.token.value, c.confidence});
  json j = {{"type", "step"},
            {"step", r.step},
            {"block_start", r.block_start},
            {"masked_before", r.masked_before},
            {"commits", commits},
            {"anchor_part", r.anchor_part},
            {"conflict_part", r.conflict_part},
            {"fallback", r.used_fallback}};
  if (r.sinks) {
    j["sink_mass"] = std::vector<double>(r.sinks->mass.data(), r.sinks->mass.data() + r.sinks->mass.size());
    j["sinks"] = r.sinks->sinks;
    j["top_columns"] = r.sinks->top_columns;
  }
  return j;
}

}  // namespace

TraceWriter::TraceWriter(const std::string& path, const TraceHeader& header) : path_(path), out_(path) {
  if (!out_) throw std::runtime_error("cannot open trace file " + path);
  out_ << header_json(header).dump() << '\n';
  if (!out_) throw std::runtime_error("write failed on " + path);
}

void TraceWriter::write_step(const StepRecord& rec) {
  out_ << step_json(rec).dump() << '\n';
  out_.flush();
  if (!out_) throw std::runtime_error("write failed on " + path_);
}

void write_trace(const std::string& path, const TraceHeader& header, const std::vector<StepRecord>& steps) {
  TraceWriter w(path, header);
  for (const auto& s : steps) w.write_step(s);
}

Trace read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file " + path);
  Trace t;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error(where + ": malformed record");
    }
    try {
      const auto type = j.at("type").get<std::string>();
      if (type == "header") {
        t.header.sampler = j.at("sampler").get<std::string>();
        t.header.seed = j.at("seed").get<std::uint64_t>();
        t.header.prompt_len = j.at("prompt_len").get<std::size_t>();
        t.header.oracle = j.value("oracle", "");
        t.header.config = config_from(j.at("config"));
        have_header = true;
      } else if (type == "step") {
        StepRecord r;
        r.step = j.at("step").get<std::size_t>();
        r.block_start = j.at("block_start").get<std::size_t>();
        r.masked_before = j.at("masked_before").get<std::size_t>();
        for (const auto& c : j.at("commits")) {
          r.commits.push_back({c.at(0).get<Position>(), TokenId{c.at(1).get<std::uint32_t>()}, c.at(2).get<double>()});
        }
        r.anchor_part = j.at("anchor_part").get<std::vector<Position>>();
        r.conflict_part = j.at("conflict_part").get<std::vector<Position>>();
        r.used_fallback = j.at("fallback").get<bool>();
        if (j.contains("sink_mass")) {
          SinkReport s;
          const auto mass = j.at("sink_mass").get<std::vector<double>>();
          s.mass = Eigen::Map<const Eigen::VectorXd>(mass.data(), static_cast<Eigen::Index>(mass.size()));
          s.sinks = j.at("sinks").get<std::vector<Position>>();
          s.top_columns = j.value("top_columns", std::vector<Position>{});
          r.sinks = std::move(s);
        }
        t.steps.push_back(std::move(r));
      } else {
        throw std::runtime_error("unknown record type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
  }
  if (!have_header) throw std::runtime_error(path + ": missing header record");
  return t;
}

RunMetrics recompute_metrics(const Trace& trace, const ToyGrammar* grammar) {
  RunMetrics m;
  std::vector<std::optional<TokenId>> response(trace.header.config.gen_length);
  for (const auto& s : trace.steps) {
    accumulate_step(m, s.commits.size());
    for (const auto& c : s.commits) {
      const auto r = static_cast<std::size_t>(c.position) - trace.header.prompt_len;
      response.at(r) = c.token;
    }
  }
  if (grammar) {
    std::vector<TokenId> tokens;
    for (const auto& t : response) {
      if (!t) throw std::runtime_error("trace does not commit every response slot");
      tokens.push_back(*t);
    }
    m.invalid_pairs = toy_validate(tokens, *grammar);
  }
  return m;
}

std::vector<std::pair<std::size_t, SinkReport>> trace_sink_reports(const Trace& trace) {
  std::vector<std::pair<std::size_t, SinkReport>> out;
  for (const auto& s : trace.steps) {
    if (!s.sinks) {
      throw std::runtime_error("trace step " + std::to_string(s.step) +
                               " is missing field 'sink_mass' (attention summary)");
    }
    out.emplace_back(s.step, *s.sinks);
  }
  return out;
}

}  // namespace dawn
