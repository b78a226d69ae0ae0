#include "dawn/toy_oracle.hpp"

#include "dawn/counter_rng.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace dawn {

std::vector<TokenId> ToyGrammar::prompt() const {
  std::vector<TokenId> p;
  for (std::size_t i = 0; i < prompt_length; ++i) p.push_back(filler_token(i));
  return p;
}

std::optional<std::size_t> ToyGrammar::pair_of(std::size_t r) const {
  for (std::size_t q = 0; q < pairs.size(); ++q) {
    if (pairs[q].left == r || pairs[q].right == r) return q;
  }
  return std::nullopt;
}

std::vector<double> ToyGrammar::marginal(std::size_t q) const {
  const double top = 1.0 / static_cast<double>(k) + marginal_skew;
  const double rest = k > 1 ? (1.0 - top) / static_cast<double>(k - 1) : 0.0;
  std::vector<double> m(k, rest);
  m[favored(q)] = top;
  return m;
}

double ToyGrammar::marginal_confidence() const {
  if (k == 1) return 1.0;
  const double top = 1.0 / static_cast<double>(k) + marginal_skew;
  return std::max(top, (1.0 - top) / static_cast<double>(k - 1));
}

void ToyGrammar::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("toy grammar: " + msg); };
  if (gen_length == 0) fail("gen_length must be >= 1");
  if (k == 0) fail("k must be >= 1");
  if (filler_vocab == 0) fail("filler_vocab must be >= 1");
  if (valid_joint.size() != k) fail("valid_joint must list k entries");
  {
    auto sorted = valid_joint;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t v = 0; v < k; ++v) {
      if (sorted[v] != v) fail("valid_joint must be a permutation of 0..k-1");
    }
  }
  std::vector<char> used(gen_length, 0);
  for (const auto& p : pairs) {
    if (p.left >= gen_length || p.right >= gen_length) fail("pair outside [0, gen_length)");
    if (p.left == p.right) fail("pair members must differ");
    if (used[p.left] || used[p.right]) fail("pairs must be disjoint");
    used[p.left] = used[p.right] = 1;
  }
  if (sink_position && *sink_position >= prompt_length) fail("sink_position must be a prompt position");
  auto unit = [&](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) fail(std::string(name) + " must lie in [0,1]");
  };
  unit(sink_mass, "sink_mass");
  unit(pair_attention_mass, "pair_attention_mass");
  unit(background_mass, "background_mass");
  unit(filler_confidence, "filler_confidence");
  const double sink = sink_position ? sink_mass : 0.0;
  if (background_mass + pair_attention_mass + sink > 1.0 + 1e-12) {
    fail("background_mass + pair_attention_mass + sink_mass must not exceed 1");
  }
  const double top = 1.0 / static_cast<double>(k) + marginal_skew;
  if (!(marginal_skew >= 0.0 && top <= 1.0)) fail("marginal_skew must keep 1/k + skew in [1/k, 1]");
}

ToyGrammar default_grammar(std::size_t gen_length, std::size_t prompt_length, std::size_t n_pairs) {
  ToyGrammar g;
  g.gen_length = gen_length;
  g.prompt_length = prompt_length;
  g.valid_joint.resize(g.k);
  std::iota(g.valid_joint.begin(), g.valid_joint.end(), std::size_t{0});
  for (std::size_t i = 0; i < n_pairs && 2 * i + 1 < gen_length; ++i) g.pairs.push_back({2 * i, 2 * i + 1});
  return g;
}

AttentionMatrix<double> toy_attention(const ToyGrammar& g) {
  const auto n = static_cast<Eigen::Index>(g.total_length());
  const auto P = static_cast<Eigen::Index>(g.prompt_length);
  AttentionMatrix<double> a = AttentionMatrix<double>::Constant(n, n, g.background_mass / static_cast<double>(n));
  a.diagonal().array() += 1.0 - g.background_mass;
  for (const auto& p : g.pairs) {
    const auto l = P + static_cast<Eigen::Index>(p.left);
    const auto r = P + static_cast<Eigen::Index>(p.right);
    a(l, r) += g.pair_attention_mass;
    a(l, l) -= g.pair_attention_mass;
    a(r, l) += g.pair_attention_mass;
    a(r, r) -= g.pair_attention_mass;
  }
  if (g.sink_position) {
    const auto s = static_cast<Eigen::Index>(*g.sink_position);
    a.col(s).array() += g.sink_mass;
    a.diagonal().array() -= g.sink_mass;
  }
  return a;
}

namespace {

void check_geometry(const DecodeState& state, const ToyGrammar& g) {
  if (state.prompt_length() != g.prompt_length || state.gen_length() != g.gen_length) {
    throw OracleError(OracleErrc::dimension_mismatch,
                      "toy geometry mismatch: state is P=" + std::to_string(state.prompt_length()) +
                          " L=" + std::to_string(state.gen_length()) + ", grammar is P=" +
                          std::to_string(g.prompt_length) + " L=" + std::to_string(g.gen_length));
  }
}

StepPrediction predict_with(const DecodeState& state, const ToyGrammar& g, std::uint64_t seed,
                            AttentionMatrix<double> attention) {
  check_geometry(state, g);
  const auto n = state.total_length();
  StepPrediction pred;
  pred.top1.resize(static_cast<std::size_t>(n));
  pred.confidence = Eigen::VectorXd::Ones(n);
  pred.attention = std::move(attention);

  std::vector<std::size_t> inverse_joint(g.k);
  for (std::size_t v = 0; v < g.k; ++v) inverse_joint[g.valid_joint[v]] = v;

  for (Position p = 0; p < n; ++p) {
    if (!state.is_masked(p)) {
      pred.top1[static_cast<std::size_t>(p)] = state.token_at(p);
      continue;
    }
    const auto r = state.response_index(p);
    const auto q = g.pair_of(r);
    if (!q) {
      pred.top1[static_cast<std::size_t>(p)] = g.filler_token(r);
      pred.confidence(p) = g.filler_confidence;
      continue;
    }
    const auto& pair = g.pairs[*q];
    const bool is_left = pair.left == r;
    const auto& partner = state.slot(is_left ? pair.right : pair.left);
    TokenId token;
    if (partner) {
      const auto t = partner->token.value;
      if (is_left) {
        if (t < g.k || t >= 2 * g.k) throw std::logic_error("right partner holds a non-right token");
        token = g.left_token(inverse_joint[t - g.k]);
      } else {
        if (t >= g.k) throw std::logic_error("left partner holds a non-left token");
        token = g.right_token(g.valid_joint[t]);
      }
      pred.confidence(p) = 1.0;
    } else {
      const auto m = g.marginal(*q);
      const double u = unit_uniform(counter_hash(seed, state.step(), static_cast<std::uint64_t>(p)));
      const auto v = inverse_cdf(m, u);
      token = is_left ? g.left_token(v) : g.right_token(g.valid_joint[v]);
      pred.confidence(p) = g.marginal_confidence();
    }
    pred.top1[static_cast<std::size_t>(p)] = token;
  }
  return pred;
}

}  // namespace

StepPrediction toy_predict(const DecodeState& state, const ToyGrammar& g, std::uint64_t seed) {
  return predict_with(state, g, seed, toy_attention(g));
}

std::size_t toy_validate(const std::vector<TokenId>& response, const ToyGrammar& g) {
  if (response.size() != g.gen_length) throw std::invalid_argument("response length does not match grammar");
  std::size_t bad = 0;
  for (const auto& p : g.pairs) {
    const auto l = response[p.left].value;
    const auto r = response[p.right].value;
    const bool valid = l < g.k && r == g.right_token(g.valid_joint[l]).value;
    if (!valid) ++bad;
  }
  return bad;
}

std::size_t toy_validate(const DecodeState& state, const ToyGrammar& g) {
  if (!state.complete()) throw std::logic_error("toy_validate on an uncommitted response");
  return toy_validate(state.response_tokens(), g);
}

std::size_t toy_filler_errors(const std::vector<TokenId>& response, const ToyGrammar& g) {
  std::size_t bad = 0;
  for (std::size_t r = 0; r < g.gen_length; ++r) {
    if (!g.pair_of(r) && response.at(r) != g.filler_token(r)) ++bad;
  }
  return bad;
}

ToyOracle::ToyOracle(ToyGrammar g) : grammar_(std::move(g)) {
  grammar_.validate();
  attention_ = toy_attention(grammar_);
}

StepPrediction ToyOracle::query(const DecodeState& state, std::uint64_t seed) {
  return predict_with(state, grammar_, seed, attention_);
}

SamplerConfig toy_config(const ToyGrammar& g, SamplerConfig base) {
  base.gen_length = g.gen_length;
  base.block_length = std::min(base.block_length, g.gen_length);
  return base;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

ToyGrammar parse_grammar(std::istream& in) {
  ToyGrammar g = default_grammar();
  g.pairs.clear();
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& msg) {
    throw std::invalid_argument("grammar line " + std::to_string(lineno) + ": " + msg);
  };
  bool joint_set = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    const auto key = trim(line.substr(0, eq));
    std::istringstream val(trim(line.substr(eq + 1)));
    auto read_size = [&]() {
      long long v = -1;
      if (!(val >> v) || v < 0) fail("expected a non-negative integer for " + key);
      return static_cast<std::size_t>(v);
    };
    auto read_real = [&]() {
      double v = 0;
      if (!(val >> v)) fail("expected a number for " + key);
      return v;
    };
    if (key == "prompt_length") g.prompt_length = read_size();
    else if (key == "gen_length") g.gen_length = read_size();
    else if (key == "k") g.k = read_size();
    else if (key == "filler_vocab") g.filler_vocab = read_size();
    else if (key == "sink_mass") g.sink_mass = read_real();
    else if (key == "pair_attention_mass") g.pair_attention_mass = read_real();
    else if (key == "background_mass") g.background_mass = read_real();
    else if (key == "marginal_skew") g.marginal_skew = read_real();
    else if (key == "filler_confidence") g.filler_confidence = read_real();
    else if (key == "sink_position") {
      if (val.str() == "none") g.sink_position.reset();
      else g.sink_position = read_size();
    } else if (key == "valid_joint") {
      g.valid_joint.clear();
      long long v;
      while (val >> v) {
        if (v < 0) fail("valid_joint entries must be non-negative");
        g.valid_joint.push_back(static_cast<std::size_t>(v));
      }
      joint_set = true;
    } else if (key == "pair") {
      const auto a = read_size();
      const auto b = read_size();
      g.pairs.push_back({a, b});
    } else if (key == "default_pairs") {
      const auto n = read_size();
      for (std::size_t i = 0; i < n; ++i) g.pairs.push_back({2 * i, 2 * i + 1});
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  if (!joint_set) {
    g.valid_joint.resize(g.k);
    std::iota(g.valid_joint.begin(), g.valid_joint.end(), std::size_t{0});
  }
  g.validate();
  return g;
}

ToyGrammar load_grammar(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open grammar file " + path);
  return parse_grammar(in);
}

void write_grammar(std::ostream& out, const ToyGrammar& g) {
  out << "prompt_length = " << g.prompt_length << '\n'
      << "gen_length = " << g.gen_length << '\n'
      << "k = " << g.k << '\n'
      << "filler_vocab = " << g.filler_vocab << '\n';
  out.precision(17);
  out << "pair_attention_mass = " << g.pair_attention_mass << '\n'
      << "background_mass = " << g.background_mass << '\n'
      << "marginal_skew = " << g.marginal_skew << '\n'
      << "filler_confidence = " << g.filler_confidence << '\n'
      << "sink_mass = " << g.sink_mass << '\n';
  out << "sink_position = ";
  if (g.sink_position) out << *g.sink_position;
  else out << "none";
  out << "\nvalid_joint =";
  for (auto v : g.valid_joint) out << ' ' << v;
  out << '\n';
  for (const auto& p : g.pairs) out << "pair = " << p.left << ' ' << p.right << '\n';
}

}  // namespace dawn
