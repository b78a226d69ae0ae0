#pragma once

/**
 * Per-step update-set selection.
 *
 * Anchor-guided selection takes every masked in-block position that is
 * confident on its own (c >= tau_high) plus every induced position (an
 * out-neighbour of an anchor) that clears the relaxed tau_induced.
 * Conflict scheduling then greedily adds positions with c >= tau_low in
 * descending confidence order, never taking two conflict neighbours and
 * never taking a neighbour of the anchor part. Ties go to the lower index.
 *
 * All position sets are sorted vectors of absolute positions.
 */

#include "dawn/core.hpp"
#include "dawn/depgraph.hpp"

#include <vector>

namespace dawn {

/// Prompt positions plus response slots committed with confidence >= tau_high.
struct AnchorSet {
  std::vector<Position> positions;
  bool contains(Position p) const;
};

struct UpdateSet {
  std::vector<Position> anchor_part;
  std::vector<Position> conflict_part;
  bool used_fallback = false;  // conflict_part holds the single top-1 position

  std::vector<Position> all() const;
  std::size_t size() const { return anchor_part.size() + conflict_part.size(); }
};

AnchorSet collect_anchors(const DecodeState& state, const SamplerConfig& cfg);

/// Masked in-block positions reachable from an anchor within `hops` directed edges.
std::vector<Position> induced_positions(const DependencyGraph& g, const AnchorSet& anchors,
                                        const DecodeState& state, std::size_t hops = 1);

std::vector<Position> anchor_guided_select(const DecodeState& state, const StepPrediction& pred,
                                           const DependencyGraph& g, const SamplerConfig& cfg);

/// Returns the selection sorted; `pick_order`, when given, receives it in greedy pick order.
std::vector<Position> conflict_schedule(const DecodeState& state, const StepPrediction& pred,
                                        const DependencyGraph& g, const std::vector<Position>& anchor_part,
                                        const SamplerConfig& cfg, std::vector<Position>* pick_order = nullptr);

/// Highest-confidence masked position of the active block, lowest index on ties.
Position top1_position(const DecodeState& state, const StepPrediction& pred);

/// Anchor-guided then conflict scheduling, with a top-1 fallback when both are empty.
UpdateSet select_update_set(const DecodeState& state, const StepPrediction& pred, const DependencyGraph& g,
                            const SamplerConfig& cfg);

}  // namespace dawn
