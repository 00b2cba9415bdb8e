// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "autoprog/growth.hpp"
#include "autoprog/model.hpp"

namespace autoprog {

// One executable sub-network of the supernet. Both stores alias the
// supernet's tensors: `model_store` presents the active layers under
// contiguous logical block names for the forward pass, `step_store` keys the
// same tensors by their physical names for the optimizer.
struct ActiveView {
  SubNetSpec spec;
  std::vector<int> active_layers;  // physical indices, execution order
  ParamStore model_store;
  ParamStore step_store;
};

// Weight-nested model executable at any candidate spec of the current stage.
// The parameters are those of the largest candidate; optional layers sit
// between the always-active layers of the base network, placed from the
// classifier end, so every smaller sub-network's parameter set is a subset of
// every larger one's. The positional encoding is stored once at the largest
// grid and interpolated on read for smaller grids.
class ElasticSupernet {
 public:
  ElasticSupernet(const ParamStore& w_star, const SubNetSpec& base,
                  std::vector<SubNetSpec> lambda, GrowthOperatorKind kind,
                  const MomentumState* momentum, const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  const std::vector<SubNetSpec>& candidates() const { return lambda_; }
  const SubNetSpec& base_spec() const { return base_; }
  const SubNetSpec& largest_spec() const { return largest_; }

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  // Tensors re-created by the growth into the supernet; moment buffers for
  // these must be dropped.
  const std::vector<std::string>& reset_names() const { return reset_names_; }

  bool layer_always_active(int physical) const;
  // Physical indices of optional layers in activation order.
  const std::vector<int>& optional_activation_order() const { return optional_order_; }

  ActiveView select(const SubNetSpec& spec) const;
  SubNetSpec sample_subnet(Rng& rng) const;
  // Standalone deep copy of the sub-network, block names renumbered
  // contiguously and the positional encoding resampled to the spec's grid.
  ParamStore export_subnet(const SubNetSpec& spec) const;
  // Physical parameter names consumed by the spec's view (for nesting
  // checks).
  std::vector<std::string> view_param_names(const SubNetSpec& spec) const;

 private:
  ModelConfig cfg_;
  SubNetSpec base_;
  SubNetSpec largest_;
  std::vector<SubNetSpec> lambda_;
  ParamStore params_;
  std::vector<std::string> reset_names_;
  std::vector<bool> always_active_;
  std::vector<int> optional_order_;

  void require_candidate(const SubNetSpec& spec) const;
  std::vector<int> active_layers_for(int depth) const;
};

}  // namespace autoprog
