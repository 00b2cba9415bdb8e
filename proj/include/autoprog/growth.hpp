// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "autoprog/model.hpp"

namespace autoprog {

enum class GrowthOperatorKind { rand_init, stacking, interpolation, identity, mogrow };

std::string to_string(GrowthOperatorKind kind);
GrowthOperatorKind growth_kind_from_string(const std::string& s);

// EMA copy of the online parameters, updated every training step.
struct MomentumState {
  ParamStore ema;
  float momentum = 0.998f;
};

// ema <- m * ema + (1-m) * online, evaluated in delta form so ema == online
// is an exact fixed point. Name sets and shapes must match.
void momentum_update(MomentumState& state, const ParamStore& online);

// Re-initializes the EMA copy after a growth event.
void rebuild_momentum(MomentumState& state, const ParamStore& grown);

// Where target layer i of an l_large-deep network takes its parameters from.
// Indices count from the layer nearest the classifier (0-based); this is the
// only place the layer-index convention appears. `fresh` marks random
// initialization.
struct DepthSource {
  bool fresh = false;
  int index = 0;

  bool operator==(const DepthSource&) const = default;
};

DepthSource depth_map(GrowthOperatorKind kind, int i, int l_small, int l_large);

// True when target layer i is the carrier of its source layer under the
// interpolation mapping (the other members of the run are inserted copies).
bool interpolation_run_original(int i, int l_small, int l_large);

struct GrowthResult {
  ParamStore params;
  // Names whose tensors were re-created or re-mapped; the optimizer drops
  // moment buffers for these.
  std::vector<std::string> reset_names;
};

// Reparameterizes the smaller network's weights for the larger spec. Depth is
// handled by depth_map, the grid by positional-encoding interpolation, and
// all other shared parameters are copied. `identity` additionally arms every
// inserted block with a zero-initialized residual scale so the grown network
// computes the same function as the source. `mogrow` applies the
// interpolation mapping to the momentum copy.
GrowthResult grow(GrowthOperatorKind kind, const ParamStore& w_small, const ModelConfig& cfg,
                  const SubNetSpec& from, const SubNetSpec& to,
                  const MomentumState* momentum, std::uint64_t seed);

}  // namespace autoprog
