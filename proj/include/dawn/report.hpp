#pragma once

/**
 * Run CSV.
 *
 * Columns, in order:
 *   sampler, seed, tau_high, tau_low, tau_induced, tau_edge, tau_sink,
 *   gen_len, block_len, nfe, tokens, speedup_vs_top1, invalid_pairs,
 *   exact_match_top1, wall_ms, [sweep_<key>...], status
 *
 * speedup_vs_top1, invalid_pairs and exact_match_top1 are empty when not
 * known. status is `ok` or the failure message (quoted when needed).
 */

#include "dawn/samplers.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dawn {

struct CsvRow {
  std::string sampler;
  std::uint64_t seed = 0;
  double tau_high = 0, tau_low = 0, tau_induced = 0, tau_edge = 0, tau_sink = 0;
  std::size_t gen_len = 0, block_len = 0;
  std::size_t nfe = 0, tokens = 0;
  std::optional<double> speedup_vs_top1;
  std::optional<std::size_t> invalid_pairs;
  std::optional<bool> exact_match_top1;
  double wall_ms = 0;
  std::vector<std::pair<std::string, double>> sweep;
  std::string status = "ok";
};

std::vector<std::string> csv_columns(const std::vector<std::string>& sweep_keys = {});

CsvRow make_csv_row(SamplerKind sampler, std::uint64_t seed, const SamplerConfig& cfg, const RunMetrics& m,
                    std::optional<double> speedup = std::nullopt);
CsvRow make_csv_row(const ComparisonRow& row, const std::vector<std::string>& sweep_keys = {});

void write_csv_header(std::ostream& os, const std::vector<std::string>& sweep_keys = {});
std::string format_csv_row(const CsvRow& row);

/// Inverse of format_csv_row; the header decides how many sweep columns to expect.
CsvRow parse_csv_row(const std::string& line, const std::vector<std::string>& sweep_keys = {});

/// Splits one CSV line, honouring double-quoted fields.
std::vector<std::string> split_csv(const std::string& line);

/// Reads a config value by name (the sweepable keys).
double config_value(const SamplerConfig& cfg, const std::string& key);

}  // namespace dawn
