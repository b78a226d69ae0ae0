#include "dawn/counter_rng.hpp"
#include "dawn/depgraph.hpp"
#include "dawn/toy_oracle.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace dawn;

TEST_CASE("counter generator golden values") {
  // computed independently from the documented mixing steps
  CHECK(counter_hash(0, 0, 0) == 0x238275bc38fcbe91ULL);
  CHECK(counter_hash(7, 0, 0) == 0x9c01479161bc5d78ULL);
  CHECK(counter_hash(7, 1, 0) == 0x7010c70c013e27ecULL);
  CHECK(counter_hash(7, 0, 1) == 0xf69e37ef143706e0ULL);
  CHECK(counter_hash(123456789, 5, 17) == 0xa7912e67d0fab8a8ULL);
  CHECK(unit_uniform(counter_hash(0, 0, 0)) == 0.13870941014555427);
  CHECK(unit_uniform(counter_hash(7, 0, 0)) == 0.609394524568175);
  CHECK(unit_uniform(counter_hash(7, 1, 0)) == 0.43775600474440823);
  CHECK(unit_uniform(counter_hash(7, 0, 1)) == 0.9633517225922468);
  CHECK(unit_uniform(counter_hash(123456789, 5, 17)) == 0.6545590403993441);
  static_assert(counter_hash(0, 0, 0) == 0x238275bc38fcbe91ULL);
}

TEST_CASE("inverse cdf") {
  const std::vector<double> m{0.3, 0.7 / 3, 0.7 / 3, 0.7 / 3};
  CHECK(inverse_cdf(m, 0.0) == 0);
  CHECK(inverse_cdf(m, 0.2999) == 0);
  CHECK(inverse_cdf(m, 0.3) == 1);
  CHECK(inverse_cdf(m, 0.13870941014555427) == 0);
  CHECK(inverse_cdf(m, 0.609394524568175) == 2);
  CHECK(inverse_cdf(m, 0.9633517225922468) == 3);
  CHECK(inverse_cdf(m, 0.9999999999999999) == 3);
}

TEST_CASE("marginal confidence and filler confidence") {
  auto g = default_grammar();
  CHECK(g.marginal_confidence() == doctest::Approx(0.30));
  auto m = g.marginal(0);
  CHECK(m[0] == doctest::Approx(0.30));
  CHECK(m[1] == doctest::Approx(0.7 / 3));

  DecodeState s(g.prompt(), 32, 32);
  auto p = toy_predict(s, g, 1);
  for (std::size_t r = 0; r < 32; ++r) {
    const auto pos = s.absolute(r);
    if (g.pair_of(r)) {
      CHECK(p.confidence(pos) == doctest::Approx(0.30));
    } else {
      CHECK(p.confidence(pos) == 0.95);
      CHECK(p.top1[pos] == g.filler_token(r));
    }
  }
}

TEST_CASE("committed partner fixes the other member") {
  auto g = default_grammar(4, 32, 2);
  g.valid_joint = {2, 0, 3, 1};
  // "house" is right index 2, so its valid left is index 0 ("full")
  DecodeState s(g.prompt(), 4, 4);
  s.commit(1, g.right_token(2), 0.3);
  auto p = toy_predict(s, g, 9);
  CHECK(p.confidence(32) == 1.0);
  CHECK(p.top1[32] == g.left_token(0));

  s.commit(2, g.left_token(3), 0.3);
  p = toy_predict(s, g, 9);
  CHECK(p.confidence(35) == 1.0);
  CHECK(p.top1[35] == g.right_token(1));
}

TEST_CASE("marginal draws follow the documented generator") {
  auto g = default_grammar(2, 32, 1);
  DecodeState s(g.prompt(), 2, 2);
  auto m = g.marginal(0);
  for (std::uint64_t seed : {0ULL, 7ULL, 42ULL, 123456789ULL}) {
    auto p = toy_predict(s, g, seed);
    const auto vl = inverse_cdf(m, unit_uniform(counter_hash(seed, 0, 32)));
    const auto vr = inverse_cdf(m, unit_uniform(counter_hash(seed, 0, 33)));
    CHECK(p.top1[32] == g.left_token(vl));
    CHECK(p.top1[33] == g.right_token(g.valid_joint[vr]));
  }
}

TEST_CASE("draw frequencies match the marginal") {
  auto g = default_grammar(2, 32, 1);
  DecodeState s(g.prompt(), 2, 2);
  std::vector<int> counts(g.k, 0);
  const int trials = 20000;
  for (int seed = 0; seed < trials; ++seed) counts[toy_predict(s, g, static_cast<std::uint64_t>(seed)).top1[32].value]++;
  auto m = g.marginal(0);
  for (std::size_t v = 0; v < g.k; ++v) CHECK(counts[v] / double(trials) == doctest::Approx(m[v]).epsilon(0.05));
}

TEST_CASE("joint invalid probability by enumeration") {
  auto g = default_grammar();
  auto m = g.marginal(0);
  double invalid = 0.0;
  for (std::size_t v = 0; v < g.k; ++v) {
    for (std::size_t w = 0; w < g.k; ++w) {
      if (v != w) invalid += m[v] * m[w];
    }
  }
  CHECK(invalid == doctest::Approx(0.746667).epsilon(1e-6));
  CHECK(invalid == doctest::Approx(1.0 - (0.09 + 3 * (0.7 / 3) * (0.7 / 3))));
}

TEST_CASE("validate pairs") {
  auto g = default_grammar(6, 32, 2);
  g.valid_joint = {1, 2, 3, 0};
  std::vector<TokenId> good{g.left_token(0), g.right_token(1), g.left_token(3), g.right_token(0), g.filler_token(4),
                            g.filler_token(5)};
  CHECK(toy_validate(good, g) == 0);
  CHECK(toy_filler_errors(good, g) == 0);
  auto bad = good;
  bad[1] = g.right_token(0);
  bad[4] = g.filler_token(0);
  CHECK(toy_validate(bad, g) == 1);
  CHECK(toy_filler_errors(bad, g) == 1);
  bad[2] = g.right_token(0);  // wrong side
  CHECK(toy_validate(bad, g) == 2);
}

TEST_CASE("attention rows sum to one and predictions are conditionally deterministic") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    const std::size_t L = 2 + rng() % 30;
    auto g = default_grammar(L, 8 + rng() % 40, rng() % (L / 2 + 1));
    g.background_mass = (rng() % 10) / 100.0;
    if (rng() % 2) {
      g.sink_position = rng() % g.prompt_length;
      g.sink_mass = (rng() % 40) / 100.0;
    }
    g.validate();
    auto a = toy_attention(g);
    CHECK((a.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-9);
    CHECK(a.minCoeff() >= 0.0);

    DecodeState s(g.prompt(), L, L);
    for (std::size_t r = 0; r < L; ++r) {
      if (rng() % 3 == 0) {
        auto p = toy_predict(s, g, rng());
        s.commit(r, p.top1[s.absolute(r)], p.confidence(s.absolute(r)));
      }
    }
    if (s.complete()) continue;
    auto p = toy_predict(s, g, rng());
    validate_prediction(p, s, g.vocab_size(), 1e-9);
    for (const auto& pair : g.pairs) {
      const auto& ls = s.slot(pair.left);
      const auto& rs = s.slot(pair.right);
      if (ls && !rs) {
        CHECK(p.confidence(s.absolute(pair.right)) == 1.0);
        CHECK(p.top1[s.absolute(pair.right)] == g.right_token(g.valid_joint[ls->token.value]));
      }
      if (rs && !ls) {
        CHECK(p.confidence(s.absolute(pair.left)) == 1.0);
        std::vector<TokenId> probe(L, TokenId{0});
        probe[pair.left] = p.top1[s.absolute(pair.left)];
        probe[pair.right] = rs->token;
        auto single = g;
        single.pairs = {pair};
        CHECK(toy_validate(probe, single) == 0);
      }
    }
  }
}

TEST_CASE("sink column in toy attention") {
  auto g = default_grammar();
  g.sink_position = 0;
  const auto a = toy_attention(g);
  const auto n = static_cast<Position>(g.total_length());
  CHECK(incoming_mass(a)(0) > 0.01);
  auto filtered = build_graph(a, 0.07, 0.01);
  CHECK(filtered.sinks == std::vector<Position>{0});
  CHECK(filtered.out_degree(0) == 0);
  CHECK(filtered.in_edges[0].empty());
  CHECK(filtered.edge_count() == 2 * g.pairs.size());
  auto off = build_graph(a, 0.07, 0.01, SinkFilter::off);
  CHECK(off.out_degree(0) == static_cast<std::size_t>(n - 1));

  g.sink_position.reset();
  auto clean = build_graph(toy_attention(g), 0.07, 0.01);
  CHECK(clean.sinks.empty());
  CHECK(clean.edge_count() == 2 * g.pairs.size());
}

TEST_CASE("geometry mismatch is an oracle error") {
  auto g = default_grammar();
  ToyOracle o(g);
  DecodeState s(g.prompt(), 16, 16);
  try {
    o.query(s, 0);
    FAIL("expected dimension error");
  } catch (const OracleError& e) {
    CHECK(e.code() == OracleErrc::dimension_mismatch);
  }
}

TEST_CASE("grammar file round trip") {
  auto g = default_grammar(20, 24, 3);
  g.pairs.push_back({10, 15});
  g.valid_joint = {3, 1, 0, 2};
  g.sink_position = 5;
  g.marginal_skew = 0.1;
  std::stringstream ss;
  write_grammar(ss, g);
  auto back = parse_grammar(ss);
  CHECK(back.prompt_length == 24);
  CHECK(back.gen_length == 20);
  CHECK(back.valid_joint == g.valid_joint);
  REQUIRE(back.pairs.size() == 4);
  CHECK(back.pairs[3].left == 10);
  CHECK(back.pairs[3].right == 15);
  CHECK(back.sink_position == std::optional<std::size_t>{5});
  CHECK(back.marginal_skew == 0.1);
  CHECK(back.sink_mass == g.sink_mass);
}

TEST_CASE("grammar parse errors") {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return parse_grammar(in);
  };
  CHECK(parse("# only comments\n").pairs.empty());
  CHECK(parse("default_pairs = 8\n").pairs.size() == 8);
  CHECK_THROWS_AS(parse("colour = red\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse("k = four\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse("pair = 0 1\npair = 1 2\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse("valid_joint = 0 0 1 2\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse("sink_position = 40\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse("pair = 0 32\n"), std::invalid_argument);
}
