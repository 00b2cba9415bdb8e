// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>

#include "autoprog/model.hpp"

namespace autoprog {

// Analytic per-sample compute estimates, in multiply-accumulates (the usual
// "FLOPs" convention for transformer papers).
double forward_flops(const ModelConfig& cfg, const SubNetSpec& spec);

// Forward plus backward, approximated as 3x the forward pass.
double train_flops(const ModelConfig& cfg, const SubNetSpec& spec);

// Per-iteration training-cost proxy T for one spec: analytic by default, with
// an optional per-spec calibration factor from measured wall time. Monotone
// in both spec dimensions.
class CostModel {
 public:
  explicit CostModel(ModelConfig cfg) : cfg_(std::move(cfg)) {}

  const ModelConfig& config() const { return cfg_; }

  double cost(const SubNetSpec& spec) const;

  // Stores measured_seconds(spec) / analytic(spec) multipliers for the given
  // specs; subsequent cost() calls on those specs are wall-time calibrated.
  void calibrate(const std::vector<SubNetSpec>& specs,
                 const std::function<double(const SubNetSpec&)>& measured_seconds);
  void clear_calibration() { factors_.clear(); }

 private:
  ModelConfig cfg_;
  std::map<std::pair<int, int>, double> factors_;
};

}  // namespace autoprog
