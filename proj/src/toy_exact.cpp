#include "dawn/toy_exact.hpp"

#include <algorithm>
#include <set>

namespace dawn {

double toy_pair_invalid_probability(const ToyGrammar& g, std::size_t q) {
  const auto m = g.marginal(q);
  // right draw v' yields right token valid_joint[v'], so the pair is valid iff v' == v
  double invalid = 0.0;
  for (std::size_t left = 0; left < g.k; ++left) {
    for (std::size_t right_src = 0; right_src < g.k; ++right_src) {
      const bool valid = g.valid_joint[right_src] == g.valid_joint[left];
      if (!valid) invalid += m[left] * m[right_src];
    }
  }
  return invalid;
}

namespace {

struct ToyGeometry {
  std::size_t P, L, n;
  std::vector<long> partner;  // absolute -> absolute partner, -1 if none

  explicit ToyGeometry(const ToyGrammar& g)
      : P(g.prompt_length), L(g.gen_length), n(g.prompt_length + g.gen_length), partner(n, -1) {
    for (const auto& p : g.pairs) {
      partner[P + p.left] = static_cast<long>(P + p.right);
      partner[P + p.right] = static_cast<long>(P + p.left);
    }
  }
};

double attention_entry(const ToyGrammar& g, const ToyGeometry& geo, std::size_t i, std::size_t j) {
  double a = g.background_mass / static_cast<double>(geo.n);
  const double sink = g.sink_position ? g.sink_mass : 0.0;
  const double rho = geo.partner[i] >= 0 ? g.pair_attention_mass : 0.0;
  if (i == j) a += 1.0 - g.background_mass - rho - sink;
  if (geo.partner[i] == static_cast<long>(j)) a += g.pair_attention_mass;
  if (g.sink_position && *g.sink_position == j) a += g.sink_mass;
  return a;
}

}  // namespace

ExactTranscript toy_exact_oracle(const ToyGrammar& g, const SamplerConfig& cfg, SamplerKind sampler) {
  g.validate();
  if (g.pairs.size() > kExactMaxPairs || g.gen_length > kExactMaxGenLength) {
    throw std::length_error("toy_exact_oracle: instance too large");
  }
  if (cfg.gen_length != g.gen_length) throw std::invalid_argument("config gen_length differs from grammar");
  if (cfg.block_length == 0) throw std::invalid_argument("block_length must be >= 1");

  const ToyGeometry geo(g);
  ExactTranscript t;
  t.sampler = sampler;

  // sinks and edges from the closed-form attention
  std::set<std::size_t> sinks;
  for (std::size_t j = 0; j < geo.n; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < geo.n; ++i) {
      if (i != j) col += attention_entry(g, geo, i, j);
    }
    if (col / static_cast<double>(geo.n) > cfg.tau_sink) sinks.insert(j);
  }
  t.sinks.assign(sinks.begin(), sinks.end());
  std::set<std::pair<std::size_t, std::size_t>> edges;  // (from key j, to query i)
  for (std::size_t i = 0; i < geo.n; ++i) {
    for (std::size_t j = 0; j < geo.n; ++j) {
      if (i == j || attention_entry(g, geo, i, j) < cfg.tau_edge) continue;
      const bool key_sink = sinks.count(j) > 0;
      const bool query_sink = sinks.count(i) > 0;
      if (cfg.sink_filter == SinkFilter::both && (key_sink || query_sink)) continue;
      if (cfg.sink_filter == SinkFilter::key_only && key_sink) continue;
      edges.insert({j, i});
    }
  }
  t.edge_count = edges.size();
  auto conflicting = [&](std::size_t a, std::size_t b) { return edges.count({a, b}) || edges.count({b, a}); };

  std::vector<char> committed(geo.n, 0);
  std::vector<double> commit_conf(geo.n, 1.0);
  for (std::size_t p = 0; p < geo.P; ++p) committed[p] = 1;
  std::vector<char> from_marginal(geo.n, 0);
  std::vector<long> commit_step(geo.n, -1);

  auto confidence = [&](std::size_t p) {
    if (committed[p]) return 1.0;
    if (geo.partner[p] < 0) return g.filler_confidence;
    return committed[static_cast<std::size_t>(geo.partner[p])] ? 1.0 : g.marginal_confidence();
  };

  std::size_t block_start = 0;
  std::size_t remaining = geo.L;
  while (remaining > 0) {
    while (true) {
      const std::size_t end = std::min(block_start + cfg.block_length, geo.L);
      bool done = true;
      for (std::size_t r = block_start; r < end; ++r) done = done && committed[geo.P + r];
      if (!done) break;
      block_start += cfg.block_length;
    }
    const std::size_t block_end = std::min(block_start + cfg.block_length, geo.L);

    std::vector<std::size_t> masked;
    std::vector<double> c(geo.n, 1.0);
    for (std::size_t p = 0; p < geo.n; ++p) c[p] = confidence(p);
    for (std::size_t r = block_start; r < block_end; ++r) {
      if (!committed[geo.P + r]) masked.push_back(geo.P + r);
    }

    auto argmax_masked = [&]() {
      std::size_t best = masked.front();
      for (auto p : masked) {
        if (c[p] > c[best]) best = p;
      }
      return best;
    };

    std::set<std::size_t> chosen;
    bool fallback = false;
    if (sampler == SamplerKind::top1) {
      chosen.insert(argmax_masked());
      fallback = true;
    } else if (sampler == SamplerKind::confidence) {
      for (auto p : masked) {
        if (c[p] >= cfg.tau_high) chosen.insert(p);
      }
      if (chosen.empty()) {
        chosen.insert(argmax_masked());
        fallback = true;
      }
    } else {
      std::set<std::size_t> reach;
      for (std::size_t p = 0; p < geo.n; ++p) {
        if (committed[p] && commit_conf[p] >= cfg.tau_high) reach.insert(p);
      }
      const std::set<std::size_t> anchors = reach;
      std::set<std::size_t> induced;
      std::set<std::size_t> layer = anchors;
      for (std::size_t h = 0; h < cfg.induced_hops; ++h) {
        std::set<std::size_t> next;
        for (const auto& [from, to] : edges) {
          if (layer.count(from) && !reach.count(to)) next.insert(to);
        }
        for (auto p : next) {
          reach.insert(p);
          induced.insert(p);
        }
        layer = next;
      }
      std::set<std::size_t> u_anchor;
      for (auto p : masked) {
        if (c[p] >= cfg.tau_high || (induced.count(p) && c[p] >= cfg.tau_induced)) u_anchor.insert(p);
      }
      std::set<std::size_t> excluded = u_anchor;
      for (auto a : u_anchor) {
        for (std::size_t p = 0; p < geo.n; ++p) {
          if (conflicting(a, p)) excluded.insert(p);
        }
      }
      std::set<std::size_t> candidates;
      for (auto p : masked) {
        if (c[p] >= cfg.tau_low && !excluded.count(p)) candidates.insert(p);
      }
      std::set<std::size_t> u_conflict;
      while (!candidates.empty()) {
        std::size_t best = *candidates.begin();
        for (auto p : candidates) {
          if (c[p] > c[best]) best = p;
        }
        u_conflict.insert(best);
        std::erase_if(candidates, [&](std::size_t p) { return p == best || conflicting(best, p); });
      }
      chosen = u_anchor;
      chosen.insert(u_conflict.begin(), u_conflict.end());
      if (chosen.empty()) {
        chosen.insert(argmax_masked());
        fallback = true;
      }
    }

    ExactStep step;
    step.fallback = fallback;
    for (auto p : chosen) {
      if (geo.partner[p] >= 0 && !committed[static_cast<std::size_t>(geo.partner[p])]) from_marginal[p] = 1;
    }
    for (auto p : chosen) {
      committed[p] = 1;
      commit_conf[p] = c[p];
      commit_step[p] = static_cast<long>(t.nfe);
      step.committed.push_back(p - geo.P);
    }
    remaining -= chosen.size();
    t.steps.push_back(std::move(step));
    ++t.nfe;
  }

  for (std::size_t q = 0; q < g.pairs.size(); ++q) {
    const auto l = geo.P + g.pairs[q].left;
    const auto r = geo.P + g.pairs[q].right;
    const bool joint = from_marginal[l] && from_marginal[r] && commit_step[l] == commit_step[r];
    t.pair_joint.push_back(joint ? 1 : 0);
    const double p = joint ? toy_pair_invalid_probability(g, q) : 0.0;
    t.pair_invalid_probability.push_back(p);
    t.expected_invalid_pairs += p;
  }
  return t;
}

}  // namespace dawn
