#include "dawn/config_io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

namespace dawn {

namespace {

double to_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double d = 0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw std::invalid_argument(key + ": expected a number, got '" + v + "'");
  return d;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw std::invalid_argument(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace

void set_config_field(SamplerConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "tau_high") cfg.tau_high = to_real(key, value);
  else if (key == "tau_low") cfg.tau_low = to_real(key, value);
  else if (key == "tau_induced") cfg.tau_induced = to_real(key, value);
  else if (key == "tau_edge") cfg.tau_edge = to_real(key, value);
  else if (key == "tau_sink") cfg.tau_sink = to_real(key, value);
  else if (key == "gen_length") cfg.gen_length = to_size(key, value);
  else if (key == "block_length") cfg.block_length = to_size(key, value);
  else if (key == "attn_layers") cfg.attn_layers = to_size(key, value);
  else if (key == "induced_hops") cfg.induced_hops = to_size(key, value);
  else if (key == "sink_filter") {
    const auto f = parse_sink_filter(value);
    if (!f) throw std::invalid_argument("sink_filter: expected both, key or off, got '" + value + "'");
    cfg.sink_filter = *f;
  } else {
    throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

std::vector<std::string> apply_config_text(std::istream& in, SamplerConfig& cfg) {
  std::vector<std::string> keys;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    try {
      set_config_field(cfg, key, trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": " + e.what());
    }
    keys.push_back(key);
  }
  return keys;
}

std::vector<std::string> apply_config_file(const std::string& path, SamplerConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path);
  return apply_config_text(in, cfg);
}

void write_config_text(std::ostream& out, const SamplerConfig& cfg) {
  const auto old_precision = out.precision(9);
  out << "tau_high = " << cfg.tau_high << '\n'
      << "tau_low = " << cfg.tau_low << '\n'
      << "tau_induced = " << cfg.tau_induced << '\n'
      << "tau_edge = " << cfg.tau_edge << '\n'
      << "tau_sink = " << cfg.tau_sink << '\n'
      << "gen_length = " << cfg.gen_length << '\n'
      << "block_length = " << cfg.block_length << '\n'
      << "attn_layers = " << cfg.attn_layers << '\n'
      << "induced_hops = " << cfg.induced_hops << '\n'
      << "sink_filter = " << to_string(cfg.sink_filter) << '\n';
  out.precision(old_precision);
}

namespace {

struct PresetRow {
  const char* model;
  double tau_induced, tau_sink, tau_edge;
  std::array<double, 4> tau_low;  // gsm8k, math, humaneval, mbpp
};

constexpr std::array<PresetRow, 4> kPresets{{
    {"llada-8b-instruct", 0.70, 0.01, 0.07, {0.75, 0.75, 0.80, 0.70}},
    {"llada-1.5", 0.70, 0.01, 0.07, {0.75, 0.75, 0.80, 0.75}},
    {"dream-v0-base-7b", 0.75, 0.03, 0.05, {0.75, 0.80, 0.80, 0.80}},
    {"dream-v0-instruct-7b", 0.75, 0.03, 0.10, {0.80, 0.80, 0.80, 0.80}},
}};

}  // namespace

std::optional<SamplerConfig> preset(const std::string& model, const std::string& benchmark) {
  static constexpr std::array<const char*, 4> kBenchmarks{"gsm8k", "math", "humaneval", "mbpp"};
  std::size_t b = kBenchmarks.size();
  for (std::size_t i = 0; i < kBenchmarks.size(); ++i) {
    if (benchmark == kBenchmarks[i]) b = i;
  }
  if (b == kBenchmarks.size()) return std::nullopt;
  for (const auto& row : kPresets) {
    if (model != row.model) continue;
    SamplerConfig cfg;
    cfg.tau_induced = row.tau_induced;
    cfg.tau_sink = row.tau_sink;
    cfg.tau_edge = row.tau_edge;
    cfg.tau_low = row.tau_low[b];
    return cfg;
  }
  return std::nullopt;
}

std::vector<std::string> preset_models() {
  std::vector<std::string> out;
  for (const auto& row : kPresets) out.emplace_back(row.model);
  return out;
}

}  // namespace dawn
