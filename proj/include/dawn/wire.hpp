#pragma once

/**
 * Model-oracle wire protocol: one JSON object per line.
 *
 *   client -> server  {"type":"hello","session":S,"prompt_len":P,"gen_len":L,"attn_layers":K}
 *   server -> client  {"type":"hello","session":S,"prompt_len":P,"gen_len":L,"attn_layers":K,"vocab_size":V}
 *   client -> server  {"type":"request","id":N,"prompt_len":P,"tokens":[...],"seed":X,"step":T}
 *   server -> client  {"type":"response","id":N,"top1":[...],"conf":[...],"attn":[[...],...]}
 *   either direction  {"type":"error","id":N|null,"field":F,"message":M}
 *
 * tokens has P+L entries with masked slots encoded as -1. attn is the
 * (P+L)x(P+L) head- and layer-averaged attention, rows are queries.
 * Reals are written with 9 significant digits.
 */

#include "dawn/core.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dawn::wire {

inline constexpr std::int64_t kMaskSentinel = -1;

struct Hello {
  std::string session;
  std::size_t prompt_len = 0;
  std::size_t gen_len = 0;
  std::size_t attn_layers = 4;
  std::optional<std::size_t> vocab_size;  // set by the server

  bool operator==(const Hello&) const = default;
};

struct Request {
  std::uint64_t id = 0;
  std::size_t prompt_len = 0;
  std::vector<std::int64_t> tokens;
  std::uint64_t seed = 0;
  std::size_t step = 0;

  bool operator==(const Request&) const = default;
};

struct Response {
  std::uint64_t id = 0;
  std::vector<std::int64_t> top1;
  std::vector<double> conf;
  std::vector<std::vector<double>> attn;

  bool operator==(const Response&) const = default;
};

struct ErrorRecord {
  std::optional<std::uint64_t> id;
  std::string field;
  std::string message;

  bool operator==(const ErrorRecord&) const = default;
};

using Record = std::variant<Hello, Request, Response, ErrorRecord>;

/// Single line, no trailing newline.
std::string encode(const Record& r);

/// Throws OracleError(protocol) naming the offending field.
Record decode(std::string_view line);

std::string format_real(double v);

Request make_request(std::uint64_t id, const DecodeState& state, std::uint64_t seed);

/// Rebuilds a decode state from a request (block = whole response, commit confidences 1.0).
DecodeState state_from_request(const Request& req);

Response make_response(std::uint64_t id, const StepPrediction& pred);

/// Shape checks against the state, then conversion. Value checks are left to validate_prediction.
StepPrediction to_prediction(const Response& resp, const DecodeState& state);

}  // namespace dawn::wire
