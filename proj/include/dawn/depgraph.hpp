#pragma once

/**
 * Per-step dependency graph built from an aggregated attention matrix.
 *
 * Row i of the matrix is query i's distribution over keys. An edge j -> i
 * means query i places at least tau_edge of its mass on key j, i.e. the
 * prediction at i is conditioned on j. Positions whose mean incoming mass
 * (diagonal excluded, divided by the full dimension n) exceeds tau_sink are
 * attention sinks and are filtered before edges are taken.
 *
 * The templated entry points accept any Eigen dense expression, so callers
 * can pass blocks, maps or float matrices without copying.
 */

#include "dawn/core.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <iosfwd>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace dawn {

struct DependencyGraph {
  Position n = 0;
  std::vector<std::vector<Position>> out_edges;  // j -> successors i, sorted
  std::vector<std::vector<Position>> in_edges;   // i -> predecessors j, sorted
  std::vector<Position> sinks;                   // sorted

  explicit DependencyGraph(Position size = 0)
      : n(size), out_edges(static_cast<std::size_t>(size)), in_edges(static_cast<std::size_t>(size)) {}

  bool has_edge(Position from, Position to) const;
  bool is_sink(Position p) const { return std::binary_search(sinks.begin(), sinks.end(), p); }
  std::size_t edge_count() const;
  std::size_t out_degree(Position p) const { return out_edges.at(static_cast<std::size_t>(p)).size(); }

  /// Appends j -> i. Callers must add edges in (i, j) lexicographic order or call sort() afterwards.
  void add_edge(Position from, Position to);
  void sort();
};

namespace detail {

template <typename Derived>
void require_square(const Eigen::MatrixBase<Derived>& a) {
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("attention matrix must be square, got " + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()));
  }
}

}  // namespace detail

/// Mean incoming attention per key column, self-attention excluded.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> incoming_mass(const Eigen::MatrixBase<Derived>& a) {
  detail::require_square(a);
  using Scalar = typename Derived::Scalar;
  const auto n = a.rows();
  if (n == 0) return {};
  return (a.colwise().sum().transpose() - a.diagonal()) / static_cast<Scalar>(n);
}

template <typename Derived>
std::vector<Position> detect_sinks(const Eigen::MatrixBase<Derived>& a, typename Derived::Scalar tau_sink) {
  const auto mass = incoming_mass(a);
  std::vector<Position> sinks;
  for (Eigen::Index j = 0; j < mass.size(); ++j) {
    if (mass(j) > tau_sink) sinks.push_back(j);
  }
  return sinks;
}

template <typename Derived>
DependencyGraph build_graph(const Eigen::MatrixBase<Derived>& a, typename Derived::Scalar tau_edge,
                            typename Derived::Scalar tau_sink, SinkFilter filter = SinkFilter::both) {
  DependencyGraph g(a.rows());
  g.sinks = detect_sinks(a, tau_sink);
  std::vector<char> sink(static_cast<std::size_t>(g.n), 0);
  for (auto s : g.sinks) sink[static_cast<std::size_t>(s)] = 1;

  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const bool query_sink = sink[static_cast<std::size_t>(i)] != 0;
    if (query_sink && filter == SinkFilter::both) continue;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (i == j || a(i, j) < tau_edge) continue;
      if (sink[static_cast<std::size_t>(j)] != 0 && filter != SinkFilter::off) continue;
      g.add_edge(j, i);
    }
  }
  return g;
}

DependencyGraph build_graph(const StepPrediction& pred, const SamplerConfig& cfg);

/// Undirected neighbourhood: out_edges[i] U in_edges[i], sorted.
std::vector<Position> conflict_neighbors(const DependencyGraph& g, Position i);

struct SinkReport {
  Eigen::VectorXd mass;
  std::vector<Position> sinks;
  std::vector<Position> top_columns;  // by mass descending, ties by position
};

template <typename Derived>
SinkReport sink_report(const Eigen::MatrixBase<Derived>& a, typename Derived::Scalar tau_sink,
                       std::size_t top_k = 5) {
  SinkReport r;
  r.mass = incoming_mass(a).template cast<double>();
  for (Eigen::Index j = 0; j < r.mass.size(); ++j) {
    if (r.mass(j) > static_cast<double>(tau_sink)) r.sinks.push_back(j);
  }
  std::vector<Position> order(static_cast<std::size_t>(r.mass.size()));
  std::iota(order.begin(), order.end(), Position{0});
  std::stable_sort(order.begin(), order.end(), [&](Position x, Position y) { return r.mass(x) > r.mass(y); });
  order.resize(std::min(order.size(), top_k));
  r.top_columns = std::move(order);
  return r;
}

/// CSV columns: step,position,mean_incoming_mass,is_sink
void write_sink_csv_header(std::ostream& os);
void write_sink_csv_rows(std::ostream& os, std::size_t step, const SinkReport& report);

}  // namespace dawn
