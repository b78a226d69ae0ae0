#include "dawn/scheduler.hpp"

#include <algorithm>
#include <deque>

namespace dawn {

bool AnchorSet::contains(Position p) const { return std::binary_search(positions.begin(), positions.end(), p); }

std::vector<Position> UpdateSet::all() const {
  std::vector<Position> out;
  std::merge(anchor_part.begin(), anchor_part.end(), conflict_part.begin(), conflict_part.end(),
             std::back_inserter(out));
  return out;
}

AnchorSet collect_anchors(const DecodeState& state, const SamplerConfig& cfg) {
  AnchorSet a;
  for (std::size_t p = 0; p < state.prompt_length(); ++p) a.positions.push_back(static_cast<Position>(p));
  for (std::size_t r = 0; r < state.gen_length(); ++r) {
    const auto& s = state.slot(r);
    if (s && s->confidence >= cfg.tau_high) a.positions.push_back(state.absolute(r));
  }
  return a;
}

std::vector<Position> induced_positions(const DependencyGraph& g, const AnchorSet& anchors,
                                        const DecodeState& state, std::size_t hops) {
  std::vector<int> depth(static_cast<std::size_t>(g.n), -1);
  std::deque<Position> frontier;
  for (auto a : anchors.positions) {
    if (a < g.n) {
      depth[static_cast<std::size_t>(a)] = 0;
      frontier.push_back(a);
    }
  }
  while (!frontier.empty()) {
    const auto j = frontier.front();
    frontier.pop_front();
    const int d = depth[static_cast<std::size_t>(j)];
    if (static_cast<std::size_t>(d) >= hops) continue;
    for (auto i : g.out_edges[static_cast<std::size_t>(j)]) {
      if (depth[static_cast<std::size_t>(i)] < 0) {
        depth[static_cast<std::size_t>(i)] = d + 1;
        frontier.push_back(i);
      }
    }
  }
  std::vector<Position> out;
  for (Position i = 0; i < g.n; ++i) {
    if (depth[static_cast<std::size_t>(i)] > 0 && state.is_masked(i) && state.in_active_block(i)) out.push_back(i);
  }
  return out;
}

std::vector<Position> anchor_guided_select(const DecodeState& state, const StepPrediction& pred,
                                           const DependencyGraph& g, const SamplerConfig& cfg) {
  const auto induced = induced_positions(g, collect_anchors(state, cfg), state, cfg.induced_hops);
  std::vector<Position> out;
  for (auto i : state.masked_in_block()) {
    const double c = pred.confidence(i);
    if (c >= cfg.tau_high) {
      out.push_back(i);
    } else if (c >= cfg.tau_induced && std::binary_search(induced.begin(), induced.end(), i)) {
      out.push_back(i);
    }
  }
  return out;
}

std::vector<Position> conflict_schedule(const DecodeState& state, const StepPrediction& pred,
                                        const DependencyGraph& g, const std::vector<Position>& anchor_part,
                                        const SamplerConfig& cfg, std::vector<Position>* pick_order) {
  std::vector<char> excluded(static_cast<std::size_t>(g.n), 0);
  for (auto a : anchor_part) {
    excluded[static_cast<std::size_t>(a)] = 1;
    for (auto nb : conflict_neighbors(g, a)) excluded[static_cast<std::size_t>(nb)] = 1;
  }

  std::vector<Position> remaining;
  for (auto i : state.masked_in_block()) {
    if (pred.confidence(i) >= cfg.tau_low && !excluded[static_cast<std::size_t>(i)]) remaining.push_back(i);
  }
  // Walking candidates in (confidence desc, index asc) order and skipping removed
  // ones yields the same picks as repeatedly taking the argmax of what is left.
  std::stable_sort(remaining.begin(), remaining.end(),
                   [&](Position x, Position y) { return pred.confidence(x) > pred.confidence(y); });

  std::vector<Position> selected;
  for (auto i : remaining) {
    if (excluded[static_cast<std::size_t>(i)]) continue;
    selected.push_back(i);
    excluded[static_cast<std::size_t>(i)] = 1;
    for (auto nb : conflict_neighbors(g, i)) excluded[static_cast<std::size_t>(nb)] = 1;
  }
  if (pick_order) *pick_order = selected;
  std::sort(selected.begin(), selected.end());
  return selected;
}

Position top1_position(const DecodeState& state, const StepPrediction& pred) {
  Position best = -1;
  for (auto i : state.masked_in_block()) {
    if (best < 0 || pred.confidence(i) > pred.confidence(best)) best = i;
  }
  if (best < 0) throw std::logic_error("active block has no masked position");
  return best;
}

UpdateSet select_update_set(const DecodeState& state, const StepPrediction& pred, const DependencyGraph& g,
                            const SamplerConfig& cfg) {
  UpdateSet u;
  u.anchor_part = anchor_guided_select(state, pred, g, cfg);
  u.conflict_part = conflict_schedule(state, pred, g, u.anchor_part, cfg);
  if (u.anchor_part.empty() && u.conflict_part.empty()) {
    u.conflict_part.push_back(top1_position(state, pred));
    u.used_fallback = true;
  }
  return u;
}

}  // namespace dawn
