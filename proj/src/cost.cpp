// SPDX-License-Identifier: Apache-2.0
#include "autoprog/cost.hpp"

#include <cmath>
#include <stdexcept>

namespace autoprog {

double forward_flops(const ModelConfig& cfg, const SubNetSpec& spec) {
  cfg.validate_spec(spec);
  const double d = cfg.embed_dim;
  const double tokens = spec.grid * spec.grid + 1.0;
  const double hidden = std::lround(cfg.mlp_ratio * cfg.embed_dim);
  const double stem = static_cast<double>(spec.grid) * spec.grid *
                      (cfg.patch * cfg.patch * 3.0) * d;
  // qkv + output projections, token mixing, and the MLP per block.
  const double projections = 4.0 * tokens * d * d;
  const double attention = 2.0 * tokens * tokens * d;
  const double mlp = 2.0 * tokens * d * hidden;
  const double head = d * cfg.classes;
  return stem + spec.depth * (projections + attention + mlp) + head;
}

double train_flops(const ModelConfig& cfg, const SubNetSpec& spec) {
  return 3.0 * forward_flops(cfg, spec);
}

double CostModel::cost(const SubNetSpec& spec) const {
  const double analytic = train_flops(cfg_, spec);
  auto it = factors_.find({spec.depth, spec.grid});
  return it == factors_.end() ? analytic : analytic * it->second;
}

void CostModel::calibrate(const std::vector<SubNetSpec>& specs,
                          const std::function<double(const SubNetSpec&)>& measured_seconds) {
  for (const SubNetSpec& spec : specs) {
    const double analytic = train_flops(cfg_, spec);
    const double measured = measured_seconds(spec);
    if (!(measured > 0.0)) {
      throw std::invalid_argument("CostModel::calibrate: non-positive measurement for " +
                                  spec.str());
    }
    factors_[{spec.depth, spec.grid}] = measured / analytic;
  }
}

}  // namespace autoprog
