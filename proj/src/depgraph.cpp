#include "dawn/depgraph.hpp"

#include <cstdio>
#include <ostream>

namespace dawn {

bool DependencyGraph::has_edge(Position from, Position to) const {
  const auto& succ = out_edges.at(static_cast<std::size_t>(from));
  return std::binary_search(succ.begin(), succ.end(), to);
}

std::size_t DependencyGraph::edge_count() const {
  std::size_t total = 0;
  for (const auto& e : out_edges) total += e.size();
  return total;
}

void DependencyGraph::add_edge(Position from, Position to) {
  if (from < 0 || from >= n || to < 0 || to >= n) throw std::out_of_range("edge endpoint out of range");
  if (from == to) throw std::invalid_argument("self-loop");
  out_edges[static_cast<std::size_t>(from)].push_back(to);
  in_edges[static_cast<std::size_t>(to)].push_back(from);
}

void DependencyGraph::sort() {
  for (auto& e : out_edges) std::sort(e.begin(), e.end());
  for (auto& e : in_edges) std::sort(e.begin(), e.end());
}

DependencyGraph build_graph(const StepPrediction& pred, const SamplerConfig& cfg) {
  return build_graph(pred.attention, cfg.tau_edge, cfg.tau_sink, cfg.sink_filter);
}

std::vector<Position> conflict_neighbors(const DependencyGraph& g, Position i) {
  if (i < 0 || i >= g.n) throw std::out_of_range("position " + std::to_string(i) + " out of range");
  const auto& out = g.out_edges[static_cast<std::size_t>(i)];
  const auto& in = g.in_edges[static_cast<std::size_t>(i)];
  std::vector<Position> nb;
  nb.reserve(out.size() + in.size());
  std::set_union(out.begin(), out.end(), in.begin(), in.end(), std::back_inserter(nb));
  return nb;
}

void write_sink_csv_header(std::ostream& os) { os << "step,position,mean_incoming_mass,is_sink\n"; }

void write_sink_csv_rows(std::ostream& os, std::size_t step, const SinkReport& report) {
  char buf[32];
  for (Eigen::Index j = 0; j < report.mass.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%.9g", report.mass(j));
    const bool sink = std::binary_search(report.sinks.begin(), report.sinks.end(), j);
    os << step << ',' << j << ',' << buf << ',' << (sink ? 1 : 0) << '\n';
  }
}

}  // namespace dawn
