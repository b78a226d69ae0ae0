#pragma once

/**
 * Flat `key = value` config files and the per-model presets.
 *
 * Keys are the SamplerConfig field names: tau_high, tau_low, tau_induced,
 * tau_edge, tau_sink, gen_length, block_length, attn_layers, induced_hops,
 * sink_filter (both | key | off). `#` starts a comment.
 */

#include "dawn/core.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dawn {

/// Throws std::invalid_argument for an unknown key or unparsable value.
void set_config_field(SamplerConfig& cfg, const std::string& key, const std::string& value);

/// Applies every assignment in the stream on top of `cfg`; returns the keys that were set.
std::vector<std::string> apply_config_text(std::istream& in, SamplerConfig& cfg);
std::vector<std::string> apply_config_file(const std::string& path, SamplerConfig& cfg);

void write_config_text(std::ostream& out, const SamplerConfig& cfg);

/// Environment variable naming a config file applied before --config.
inline constexpr const char* kConfigEnvVar = "DAWN_CONFIG";

/**
 * Tuned thresholds per model, with tau_low per benchmark.
 * model: llada-8b-instruct | llada-1.5 | dream-v0-base-7b | dream-v0-instruct-7b
 * benchmark: gsm8k | math | humaneval | mbpp
 */
std::optional<SamplerConfig> preset(const std::string& model, const std::string& benchmark = "humaneval");
std::vector<std::string> preset_models();

}  // namespace dawn
