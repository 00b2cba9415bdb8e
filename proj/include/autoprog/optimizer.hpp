// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "autoprog/param_store.hpp"

namespace autoprog {

struct OptimConfig {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  float weight_decay = 0.05f;
};

// Adam with decoupled weight decay. Moment buffers are keyed by parameter
// name and created lazily on the first gradient; bias correction uses the
// per-parameter update count so partially trained parameters (supernet
// sampling) stay well conditioned.
class Optimizer {
 public:
  explicit Optimizer(OptimConfig cfg) : cfg_(cfg) {}

  OptimConfig& config() { return cfg_; }
  const OptimConfig& config() const { return cfg_; }

  // Applies one update to every parameter in `params`; each must carry a
  // gradient.
  void step(ParamStore& params);

  // Drops the moment buffers of one parameter (no-op when absent).
  void reset_param(const std::string& name);
  // Keeps buffers only for names in `keep`.
  void retain_only(const std::vector<std::string>& keep);

  bool has_state(const std::string& name) const { return moments_.count(name) != 0; }
  std::uint64_t step_count() const { return step_count_; }
  void set_step_count(std::uint64_t n) { step_count_ = n; }

 private:
  struct Moments {
    std::vector<float> m;
    std::vector<float> v;
    std::uint64_t updates = 0;
  };

  OptimConfig cfg_;
  std::map<std::string, Moments> moments_;
  std::uint64_t step_count_ = 0;
};

}  // namespace autoprog
