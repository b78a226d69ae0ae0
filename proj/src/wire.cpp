#include "dawn/wire.hpp"

#include <json.hpp>

#include <cstdio>
#include <limits>

namespace dawn::wire {

using nlohmann::json;

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

namespace {

template <typename Range>
void append_ints(std::string& out, const Range& xs) {
  out += '[';
  bool first = true;
  for (auto x : xs) {
    if (!first) out += ',';
    first = false;
    out += std::to_string(x);
  }
  out += ']';
}

void append_reals(std::string& out, const std::vector<double>& xs) {
  out += '[';
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += format_real(xs[i]);
  }
  out += ']';
}

[[noreturn]] void bad(const std::string& field, const std::string& what) {
  throw OracleError(OracleErrc::protocol, "field '" + field + "': " + what);
}

const json& need(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end()) bad(field, "missing");
  return *it;
}

std::uint64_t need_u64(const json& j, const char* field) {
  const auto& v = need(j, field);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    bad(field, "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::vector<std::int64_t> need_int_array(const json& j, const char* field) {
  const auto& v = need(j, field);
  if (!v.is_array()) bad(field, "expected an array");
  std::vector<std::int64_t> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number_integer()) bad(field, "expected integers");
    out.push_back(x.get<std::int64_t>());
  }
  return out;
}

std::vector<double> to_reals(const json& v, const char* field) {
  if (!v.is_array()) bad(field, "expected an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) bad(field, "expected numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

std::string encode(const Record& r) {
  return std::visit(
      [](const auto& rec) -> std::string {
        using T = std::decay_t<decltype(rec)>;
        if constexpr (std::is_same_v<T, Hello>) {
          json j = {{"type", "hello"},
                    {"session", rec.session},
                    {"prompt_len", rec.prompt_len},
                    {"gen_len", rec.gen_len},
                    {"attn_layers", rec.attn_layers}};
          if (rec.vocab_size) j["vocab_size"] = *rec.vocab_size;
          return j.dump();
        } else if constexpr (std::is_same_v<T, Request>) {
          std::string out = "{\"type\":\"request\",\"id\":" + std::to_string(rec.id) +
                            ",\"prompt_len\":" + std::to_string(rec.prompt_len) + ",\"tokens\":";
          append_ints(out, rec.tokens);
          out += ",\"seed\":" + std::to_string(rec.seed) + ",\"step\":" + std::to_string(rec.step) + "}";
          return out;
        } else if constexpr (std::is_same_v<T, Response>) {
          std::string out = "{\"type\":\"response\",\"id\":" + std::to_string(rec.id) + ",\"top1\":";
          append_ints(out, rec.top1);
          out += ",\"conf\":";
          append_reals(out, rec.conf);
          out += ",\"attn\":[";
          for (std::size_t i = 0; i < rec.attn.size(); ++i) {
            if (i) out += ',';
            append_reals(out, rec.attn[i]);
          }
          out += "]}";
          return out;
        } else {
          json j = {{"type", "error"}, {"field", rec.field}, {"message", rec.message}};
          j["id"] = rec.id ? json(*rec.id) : json(nullptr);
          return j.dump();
        }
      },
      r);
}

Record decode(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw OracleError(OracleErrc::protocol, std::string("malformed record: ") + e.what());
  }
  if (!j.is_object()) bad("type", "record is not an object");
  const auto& type = need(j, "type");
  if (!type.is_string()) bad("type", "expected a string");
  const auto t = type.get<std::string>();

  if (t == "hello") {
    Hello h;
    const auto& s = need(j, "session");
    if (!s.is_string()) bad("session", "expected a string");
    h.session = s.get<std::string>();
    h.prompt_len = need_u64(j, "prompt_len");
    h.gen_len = need_u64(j, "gen_len");
    h.attn_layers = need_u64(j, "attn_layers");
    if (j.contains("vocab_size")) h.vocab_size = need_u64(j, "vocab_size");
    return h;
  }
  if (t == "request") {
    Request r;
    r.id = need_u64(j, "id");
    r.prompt_len = need_u64(j, "prompt_len");
    r.tokens = need_int_array(j, "tokens");
    if (j.contains("seed")) r.seed = need_u64(j, "seed");
    if (j.contains("step")) r.step = need_u64(j, "step");
    return r;
  }
  if (t == "response") {
    Response r;
    r.id = need_u64(j, "id");
    r.top1 = need_int_array(j, "top1");
    r.conf = to_reals(need(j, "conf"), "conf");
    const auto& attn = need(j, "attn");
    if (!attn.is_array()) bad("attn", "expected an array of rows");
    for (const auto& row : attn) r.attn.push_back(to_reals(row, "attn"));
    return r;
  }
  if (t == "error") {
    ErrorRecord e;
    if (j.contains("id") && !j["id"].is_null()) e.id = need_u64(j, "id");
    if (j.contains("field") && j["field"].is_string()) e.field = j["field"].get<std::string>();
    if (j.contains("message") && j["message"].is_string()) e.message = j["message"].get<std::string>();
    return e;
  }
  bad("type", "unknown record type '" + t + "'");
}

Request make_request(std::uint64_t id, const DecodeState& state, std::uint64_t seed) {
  Request r;
  r.id = id;
  r.prompt_len = state.prompt_length();
  r.seed = seed;
  r.step = state.step();
  r.tokens.reserve(static_cast<std::size_t>(state.total_length()));
  for (Position p = 0; p < state.total_length(); ++p) {
    r.tokens.push_back(state.is_masked(p) ? kMaskSentinel : static_cast<std::int64_t>(state.token_at(p).value));
  }
  return r;
}

DecodeState state_from_request(const Request& req) {
  if (req.prompt_len > req.tokens.size() || req.prompt_len == req.tokens.size()) {
    throw OracleError(OracleErrc::protocol, "field 'tokens': length must exceed prompt_len");
  }
  std::vector<TokenId> prompt;
  for (std::size_t i = 0; i < req.prompt_len; ++i) {
    if (req.tokens[i] < 0) throw OracleError(OracleErrc::protocol, "field 'tokens': masked prompt position");
    prompt.push_back({static_cast<std::uint32_t>(req.tokens[i])});
  }
  const std::size_t L = req.tokens.size() - req.prompt_len;
  DecodeState s(std::move(prompt), L, L);
  for (std::size_t r = 0; r < L; ++r) {
    const auto t = req.tokens[req.prompt_len + r];
    if (t == kMaskSentinel) continue;
    if (t < 0) throw OracleError(OracleErrc::protocol, "field 'tokens': negative token other than -1");
    s.commit(r, {static_cast<std::uint32_t>(t)}, 1.0);
  }
  for (std::size_t i = 0; i < req.step; ++i) s.advance_step();
  return s;
}

Response make_response(std::uint64_t id, const StepPrediction& pred) {
  Response r;
  r.id = id;
  const auto n = pred.size();
  for (const auto& t : pred.top1) r.top1.push_back(t.value);
  r.conf.assign(pred.confidence.data(), pred.confidence.data() + n);
  r.attn.resize(static_cast<std::size_t>(n));
  for (Position i = 0; i < n; ++i) {
    r.attn[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(n));
    for (Position j = 0; j < n; ++j) r.attn[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = pred.attention(i, j);
  }
  return r;
}

StepPrediction to_prediction(const Response& resp, const DecodeState& state) {
  const auto n = static_cast<std::size_t>(state.total_length());
  auto mismatch = [&](const char* field, std::size_t got) {
    throw OracleError(OracleErrc::dimension_mismatch, std::string("field '") + field + "' has length " +
                                                          std::to_string(got) + ", expected " + std::to_string(n));
  };
  if (resp.top1.size() != n) mismatch("top1", resp.top1.size());
  if (resp.conf.size() != n) mismatch("conf", resp.conf.size());
  if (resp.attn.size() != n) mismatch("attn", resp.attn.size());
  for (const auto& row : resp.attn) {
    if (row.size() != n) mismatch("attn row", row.size());
  }

  StepPrediction pred;
  pred.top1.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto t = resp.top1[i];
    if (t < 0 || t > std::numeric_limits<std::uint32_t>::max()) {
      throw OracleError(OracleErrc::value_range, "top1 token " + std::to_string(t) + " at " + std::to_string(i));
    }
    pred.top1[i] = {static_cast<std::uint32_t>(t)};
  }
  pred.confidence = Eigen::Map<const Eigen::VectorXd>(resp.conf.data(), static_cast<Eigen::Index>(n));
  pred.attention.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    pred.attention.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(resp.attn[i].data(), static_cast<Eigen::Index>(n));
  }
  return pred;
}

}  // namespace dawn::wire
