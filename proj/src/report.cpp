#include "dawn/report.hpp"

#include <charconv>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace dawn {

namespace {

const std::vector<std::string> kBaseColumns = {
    "sampler",  "seed",    "tau_high", "tau_low", "tau_induced",     "tau_edge",      "tau_sink",         "gen_len",
    "block_len", "nfe",    "tokens",   "speedup_vs_top1", "invalid_pairs", "exact_match_top1", "wall_ms"};

std::string real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + '"';
}

template <typename T>
T parse_int(const std::string& field, const std::string& s) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("csv: bad integer in " + field + ": '" + s + "'");
  }
  return v;
}

double parse_real(const std::string& field, const std::string& s) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw std::invalid_argument("csv: bad number in " + field + ": '" + s + "'");
  return v;
}

}  // namespace

double config_value(const SamplerConfig& cfg, const std::string& key) {
  if (key == "tau_high") return cfg.tau_high;
  if (key == "tau_low") return cfg.tau_low;
  if (key == "tau_induced") return cfg.tau_induced;
  if (key == "tau_edge") return cfg.tau_edge;
  if (key == "tau_sink") return cfg.tau_sink;
  if (key == "gen_length") return static_cast<double>(cfg.gen_length);
  if (key == "block_length") return static_cast<double>(cfg.block_length);
  if (key == "attn_layers") return static_cast<double>(cfg.attn_layers);
  if (key == "induced_hops") return static_cast<double>(cfg.induced_hops);
  throw std::invalid_argument("not a numeric config key: " + key);
}

std::vector<std::string> csv_columns(const std::vector<std::string>& sweep_keys) {
  auto cols = kBaseColumns;
  for (const auto& k : sweep_keys) cols.push_back("sweep_" + k);
  cols.emplace_back("status");
  return cols;
}

CsvRow make_csv_row(SamplerKind sampler, std::uint64_t seed, const SamplerConfig& cfg, const RunMetrics& m,
                    std::optional<double> speedup) {
  CsvRow r;
  r.sampler = to_string(sampler);
  r.seed = seed;
  r.tau_high = cfg.tau_high;
  r.tau_low = cfg.tau_low;
  r.tau_induced = cfg.tau_induced;
  r.tau_edge = cfg.tau_edge;
  r.tau_sink = cfg.tau_sink;
  r.gen_len = cfg.gen_length;
  r.block_len = cfg.block_length;
  r.nfe = m.nfe;
  r.tokens = m.tokens_committed;
  r.speedup_vs_top1 = speedup;
  r.invalid_pairs = m.invalid_pairs;
  r.exact_match_top1 = m.exact_match_top1;
  r.wall_ms = m.wall_ms;
  return r;
}

CsvRow make_csv_row(const ComparisonRow& row, const std::vector<std::string>& sweep_keys) {
  auto r = make_csv_row(row.sampler, row.seed, row.config, row.metrics, row.speedup_vs_top1);
  for (const auto& k : sweep_keys) r.sweep.emplace_back(k, config_value(row.config, k));
  if (!row.ok()) r.status = row.error;
  return r;
}

void write_csv_header(std::ostream& os, const std::vector<std::string>& sweep_keys) {
  const auto cols = csv_columns(sweep_keys);
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
}

std::string format_csv_row(const CsvRow& r) {
  std::string out;
  auto field = [&](const std::string& s) {
    if (!out.empty()) out += ',';
    out += s;
  };
  field(quote(r.sampler));
  field(std::to_string(r.seed));
  field(real(r.tau_high));
  field(real(r.tau_low));
  field(real(r.tau_induced));
  field(real(r.tau_edge));
  field(real(r.tau_sink));
  field(std::to_string(r.gen_len));
  field(std::to_string(r.block_len));
  field(std::to_string(r.nfe));
  field(std::to_string(r.tokens));
  field(r.speedup_vs_top1 ? real(*r.speedup_vs_top1) : "");
  field(r.invalid_pairs ? std::to_string(*r.invalid_pairs) : "");
  field(r.exact_match_top1 ? (*r.exact_match_top1 ? "1" : "0") : "");
  char wall[32];
  std::snprintf(wall, sizeof wall, "%.3f", r.wall_ms);
  field(wall);
  for (const auto& [k, v] : r.sweep) field(real(v));
  field(quote(r.status));
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else if (c != '\r') {
      out.back() += c;
    }
  }
  return out;
}

CsvRow parse_csv_row(const std::string& line, const std::vector<std::string>& sweep_keys) {
  const auto f = split_csv(line);
  const auto expected = kBaseColumns.size() + sweep_keys.size() + 1;
  if (f.size() != expected) {
    throw std::invalid_argument("csv: expected " + std::to_string(expected) + " fields, got " +
                                std::to_string(f.size()));
  }
  CsvRow r;
  r.sampler = f[0];
  r.seed = parse_int<std::uint64_t>("seed", f[1]);
  r.tau_high = parse_real("tau_high", f[2]);
  r.tau_low = parse_real("tau_low", f[3]);
  r.tau_induced = parse_real("tau_induced", f[4]);
  r.tau_edge = parse_real("tau_edge", f[5]);
  r.tau_sink = parse_real("tau_sink", f[6]);
  r.gen_len = parse_int<std::size_t>("gen_len", f[7]);
  r.block_len = parse_int<std::size_t>("block_len", f[8]);
  r.nfe = parse_int<std::size_t>("nfe", f[9]);
  r.tokens = parse_int<std::size_t>("tokens", f[10]);
  if (!f[11].empty()) r.speedup_vs_top1 = parse_real("speedup_vs_top1", f[11]);
  if (!f[12].empty()) r.invalid_pairs = parse_int<std::size_t>("invalid_pairs", f[12]);
  if (!f[13].empty()) {
    if (f[13] != "0" && f[13] != "1") throw std::invalid_argument("csv: exact_match_top1 must be 0 or 1");
    r.exact_match_top1 = f[13] == "1";
  }
  r.wall_ms = parse_real("wall_ms", f[14]);
  for (std::size_t i = 0; i < sweep_keys.size(); ++i) {
    r.sweep.emplace_back(sweep_keys[i], parse_real("sweep_" + sweep_keys[i], f[15 + i]));
  }
  r.status = f.back();
  return r;
}

}  // namespace dawn
