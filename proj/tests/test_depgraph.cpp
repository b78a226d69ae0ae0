#include "dawn/depgraph.hpp"
#include "support/reference.hpp"

#include <doctest.h>

#include <sstream>

using namespace dawn;
using namespace dawn::testing;

namespace {

// n = 64 keeps a single 0.5 partner entry below tau_sink = 0.01 once averaged.
AttentionMatrix<double> pair_matrix(std::size_t n, Position a, Position b, std::optional<Position> sink = {}) {
  const double background = 0.05;
  AttentionMatrix<double> m = AttentionMatrix<double>::Constant(n, n, background / static_cast<double>(n));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (i == a) m(i, b) += 0.5;
    if (i == b) m(i, a) += 0.5;
    if (sink) m(i, *sink) += 0.3;
    m(i, i) += 1.0 - m.row(i).sum();
  }
  return m;
}

}  // namespace

TEST_CASE("incoming mass excludes the diagonal and divides by n") {
  AttentionMatrix<double> u = AttentionMatrix<double>::Constant(100, 100, 0.01);
  auto mass = incoming_mass(u);
  CHECK(mass(0) == doctest::Approx(0.0099).epsilon(1e-12));
  CHECK(detect_sinks(u, 0.01).empty());

  AttentionMatrix<double> a(4, 4);
  a << 0.25, 0.25, 0.25, 0.25,
       0.9,  0.1,  0.0,  0.0,
       0.9,  0.0,  0.1,  0.0,
       0.9,  0.0,  0.0,  0.1;
  CHECK(incoming_mass(a)(0) == doctest::Approx(0.675));
  CHECK(detect_sinks(a, 0.5) == std::vector<Position>{0});

  auto rep = sink_report(a, 0.5);
  CHECK(rep.mass(0) == doctest::Approx(0.675));
  CHECK(rep.sinks == std::vector<Position>{0});
  CHECK(rep.top_columns.front() == 0);
}

TEST_CASE("sink comparison is strict") {
  AttentionMatrix<double> a(2, 2);
  a << 0.5, 0.5,
       0.5, 0.5;
  // each column receives 0.5 / 2 = 0.25
  CHECK(detect_sinks(a, 0.25).empty());
  CHECK(detect_sinks(a, 0.2499).size() == 2);
}

TEST_CASE("tau_sink = 1 never flags a row-stochastic matrix") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 50; ++t) {
    auto a = random_attention(2 + t % 30, rng);
    CHECK(detect_sinks(a, 1.0).empty());
  }
}

TEST_CASE("uniform attention has no edges") {
  AttentionMatrix<double> u = AttentionMatrix<double>::Constant(64, 64, 1.0 / 64);
  CHECK(build_graph(u, 0.07, 0.01).edge_count() == 0);
  CHECK(build_graph(u, 0.07, 0.01, SinkFilter::off).edge_count() == 0);

  AttentionMatrix<double> wide = AttentionMatrix<double>::Constant(100, 100, 0.01);
  auto rep = sink_report(wide, 0.01);
  CHECK(rep.sinks.empty());
  CHECK((rep.mass.array() == rep.mass(0)).all());
}

TEST_CASE("coupled pair gives exactly its two edges") {
  auto a = pair_matrix(64, 5, 9);
  auto g = build_graph(a, 0.07, 0.01);
  CHECK(g.sinks.empty());
  CHECK(g.edge_count() == 2);
  CHECK(g.has_edge(9, 5));
  CHECK(g.has_edge(5, 9));

  auto with_sink = pair_matrix(64, 5, 9, Position{0});
  auto gs = build_graph(with_sink, 0.07, 0.01);
  CHECK(gs.sinks == std::vector<Position>{0});
  CHECK(graph_edges(gs) == graph_edges(g));
  CHECK(gs.out_degree(0) == 0);
  CHECK(gs.in_edges[0].empty());

  // without filtering the sink points at everything
  auto off = build_graph(with_sink, 0.07, 0.01, SinkFilter::off);
  CHECK(off.out_degree(0) == 63);
  CHECK(off.edge_count() == 63 + 2);

  // key-only filtering keeps nothing here either: the sink row has no mass >= tau_edge off-diagonal
  auto key = build_graph(with_sink, 0.07, 0.01, SinkFilter::key_only);
  CHECK(graph_edges(key) == graph_edges(g));
}

TEST_CASE("key-only filtering keeps the sink's own outgoing-as-query edges") {
  auto a = pair_matrix(64, 0, 9, Position{0});
  // row 0 attends to 9, column 0 is the sink
  auto both = build_graph(a, 0.07, 0.01, SinkFilter::both);
  auto key = build_graph(a, 0.07, 0.01, SinkFilter::key_only);
  CHECK_FALSE(both.has_edge(9, 0));
  CHECK(key.has_edge(9, 0));
  CHECK_FALSE(key.has_edge(0, 9));
}

TEST_CASE("conflict neighbours ignore direction") {
  DependencyGraph g(10);
  g.add_edge(9, 5);
  g.add_edge(5, 9);
  g.add_edge(2, 7);
  g.sort();
  CHECK(conflict_neighbors(g, 5) == std::vector<Position>{9});
  CHECK(conflict_neighbors(g, 7) == std::vector<Position>{2});
  CHECK(conflict_neighbors(g, 2) == std::vector<Position>{7});
  CHECK(conflict_neighbors(g, 0).empty());
  CHECK_THROWS_AS(conflict_neighbors(g, 10), std::out_of_range);
}

TEST_CASE("two equal dominant columns") {
  AttentionMatrix<double> a = AttentionMatrix<double>::Zero(8, 8);
  a(0, 1) = 0.9;
  a(1, 0) = 0.9;
  for (int i = 2; i < 8; ++i) a(i, 0) = a(i, 1) = 0.45;
  for (int i = 0; i < 8; ++i) a(i, i) = 1.0 - a.row(i).sum();
  auto rep = sink_report(a, 0.3);
  CHECK(rep.mass(0) == doctest::Approx(0.45));
  CHECK(rep.mass(1) == doctest::Approx(0.45));
  CHECK(rep.sinks == std::vector<Position>{0, 1});
  REQUIRE(rep.top_columns.size() >= 2);
  CHECK(rep.top_columns[0] == 0);
  CHECK(rep.top_columns[1] == 1);
}

TEST_CASE("sink csv rows") {
  AttentionMatrix<double> a(2, 2);
  a << 0.2, 0.8,
       0.6, 0.4;
  std::ostringstream os;
  write_sink_csv_header(os);
  write_sink_csv_rows(os, 3, sink_report(a, 0.35));
  CHECK(os.str() == "step,position,mean_incoming_mass,is_sink\n3,0,0.3,0\n3,1,0.4,1\n");
}

TEST_CASE("non-square input is rejected") {
  Eigen::MatrixXd a(3, 4);
  a.setConstant(0.25);
  CHECK_THROWS_AS(build_graph(a, 0.07, 0.01), std::invalid_argument);
}

TEST_CASE("works on float blocks and maps without copying") {
  std::mt19937_64 rng(5);
  auto a = random_attention(20, rng);
  Eigen::MatrixXf f = a.cast<float>();
  auto gd = build_graph(a, 0.07, 0.01);
  auto gf = build_graph(f, 0.07f, 0.01f);
  CHECK(gd.n == gf.n);

  const auto sub = a.topLeftCorner(10, 10);
  auto gb = build_graph(sub, 0.07, 0.2);
  CHECK(gb.n == 10);
  Eigen::Map<const AttentionMatrix<double>> m(a.data(), a.rows(), a.cols());
  CHECK(graph_edges(build_graph(m, 0.07, 0.01)) == graph_edges(gd));
}

TEST_CASE("graph matches the naive double loop") {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng() % 32;
    auto a = random_attention(n, rng);
    const double tau_edge = 0.02 + 0.1 * (rng() % 100) / 100.0;
    const double tau_sink = 0.005 + 0.05 * (rng() % 100) / 100.0;
    auto g = build_graph(a, tau_edge, tau_sink);
    auto d = to_dense(a);
    auto sinks = naive_sinks(d, tau_sink);
    CHECK(std::set<Position>(g.sinks.begin(), g.sinks.end()) == sinks);
    CHECK(graph_edges(g) == naive_edges(d, tau_edge, sinks));
  }
}

TEST_CASE("graph structure invariants") {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 100; ++t) {
    auto a = random_attention(2 + rng() % 40, rng);
    for (auto filter : {SinkFilter::both, SinkFilter::key_only, SinkFilter::off}) {
      auto g = build_graph(a, 0.05, 0.03, filter);
      EdgeSet from_in;
      for (Position i = 0; i < g.n; ++i) {
        CHECK(std::is_sorted(g.in_edges[i].begin(), g.in_edges[i].end()));
        CHECK(std::is_sorted(g.out_edges[i].begin(), g.out_edges[i].end()));
        CHECK_FALSE(g.has_edge(i, i));
        for (auto j : g.in_edges[i]) from_in.insert({j, i});
      }
      CHECK(from_in == graph_edges(g));
      if (filter == SinkFilter::both) {
        for (const auto& [j, i] : from_in) {
          CHECK_FALSE(g.is_sink(j));
          CHECK_FALSE(g.is_sink(i));
        }
      }
    }
  }
}

TEST_CASE("raising thresholds never adds edges or sinks") {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 100; ++t) {
    auto a = random_attention(2 + rng() % 32, rng);
    const double e_lo = 0.03, e_hi = 0.03 + 0.2 * (rng() % 100) / 100.0;
    const double s_lo = 0.01, s_hi = 0.01 + 0.1 * (rng() % 100) / 100.0;
    // fixed tau_sink so that only tau_edge moves
    auto lo = graph_edges(build_graph(a, e_lo, s_lo));
    auto hi = graph_edges(build_graph(a, e_hi, s_lo));
    CHECK(std::includes(lo.begin(), lo.end(), hi.begin(), hi.end()));
    auto sk_lo = detect_sinks(a, s_lo);
    auto sk_hi = detect_sinks(a, s_hi);
    CHECK(std::includes(sk_lo.begin(), sk_lo.end(), sk_hi.begin(), sk_hi.end()));
  }
}

TEST_CASE("sink filtering only removes sink-incident edges") {
  std::mt19937_64 rng(1234);
  for (int t = 0; t < 100; ++t) {
    auto a = random_attention(2 + rng() % 32, rng);
    auto off = build_graph(a, 0.05, 0.02, SinkFilter::off);
    auto both = build_graph(a, 0.05, 0.02, SinkFilter::both);
    CHECK(both.edge_count() <= off.edge_count());
    EdgeSet clean_off;
    for (const auto& e : graph_edges(off)) {
      if (!off.is_sink(e.first) && !off.is_sink(e.second)) clean_off.insert(e);
    }
    CHECK(clean_off == graph_edges(both));
  }
}
