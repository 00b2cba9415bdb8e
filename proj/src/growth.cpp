// SPDX-License-Identifier: Apache-2.0
#include "autoprog/growth.hpp"

#include <stdexcept>

namespace autoprog {

std::string to_string(GrowthOperatorKind kind) {
  switch (kind) {
    case GrowthOperatorKind::rand_init: return "randinit";
    case GrowthOperatorKind::stacking: return "stacking";
    case GrowthOperatorKind::interpolation: return "interpolation";
    case GrowthOperatorKind::identity: return "identity";
    case GrowthOperatorKind::mogrow: return "mogrow";
  }
  throw std::logic_error("unknown growth operator kind");
}

GrowthOperatorKind growth_kind_from_string(const std::string& s) {
  if (s == "randinit") return GrowthOperatorKind::rand_init;
  if (s == "stacking") return GrowthOperatorKind::stacking;
  if (s == "interpolation") return GrowthOperatorKind::interpolation;
  if (s == "identity") return GrowthOperatorKind::identity;
  if (s == "mogrow") return GrowthOperatorKind::mogrow;
  throw std::invalid_argument("unknown growth operator \"" + s + "\"");
}

void momentum_update(MomentumState& state, const ParamStore& online) {
  if (state.ema.size() != online.size()) {
    throw std::runtime_error("momentum_update: EMA holds " + std::to_string(state.ema.size()) +
                             " tensors but online model holds " + std::to_string(online.size()));
  }
  const float alpha = 1.0f - state.momentum;
  for (const auto& [name, w] : online) {
    if (!state.ema.has(name)) {
      throw std::runtime_error("momentum_update: EMA is missing tensor " + name);
    }
    Tensor& e = state.ema.at(name);
    if (e.shape() != w.shape()) {
      throw std::runtime_error("momentum_update: shape mismatch for tensor " + name + ": " +
                               shape_str(e.shape()) + " vs " + shape_str(w.shape()));
    }
    float* pe = e.data().data();
    const float* pw = w.data().data();
    const std::size_t n = e.numel();
    for (std::size_t i = 0; i < n; ++i) pe[i] += alpha * (pw[i] - pe[i]);
  }
}

void rebuild_momentum(MomentumState& state, const ParamStore& grown) {
  ParamStore copy;
  for (const auto& [name, t] : grown) copy.add(name, t.clone(/*requires_grad=*/false));
  state.ema = std::move(copy);
}

DepthSource depth_map(GrowthOperatorKind kind, int i, int l_small, int l_large) {
  if (l_small < 1 || l_small > l_large) {
    throw std::invalid_argument("depth_map: cannot grow depth " + std::to_string(l_small) +
                                " to " + std::to_string(l_large) + " (shrinking unsupported)");
  }
  if (i < 0 || i >= l_large) {
    throw std::invalid_argument("depth_map: layer index " + std::to_string(i) +
                                " out of range [0," + std::to_string(l_large) + ")");
  }
  switch (kind) {
    case GrowthOperatorKind::rand_init:
      if (i < l_small) return {false, i};
      return {true, 0};
    case GrowthOperatorKind::stacking:
      return {false, i % l_small};
    case GrowthOperatorKind::interpolation:
    case GrowthOperatorKind::identity:
    case GrowthOperatorKind::mogrow:
      return {false, (i * l_small) / l_large};
  }
  throw std::logic_error("unknown growth operator kind");
}

bool interpolation_run_original(int i, int l_small, int l_large) {
  return ((i + 1) * l_small) / l_large != (i * l_small) / l_large;
}

namespace {

std::vector<std::string> copy_block(const ParamStore& src, int src_block, ParamStore& dst,
                                    int dst_block) {
  const std::string from = block_prefix(src_block) + "/";
  const std::string to = block_prefix(dst_block) + "/";
  std::vector<std::string> created;
  for (const auto& [name, t] : src) {
    if (name.starts_with(from)) {
      std::string dst_name = to + name.substr(from.size());
      dst.add(dst_name, t.clone(/*requires_grad=*/true));
      created.push_back(std::move(dst_name));
    }
  }
  if (created.empty()) {
    throw std::runtime_error("grow: source store has no block " + std::to_string(src_block));
  }
  return created;
}

}  // namespace

GrowthResult grow(GrowthOperatorKind kind, const ParamStore& w_small, const ModelConfig& cfg,
                  const SubNetSpec& from, const SubNetSpec& to, const MomentumState* momentum,
                  std::uint64_t seed) {
  cfg.validate_spec(from);
  cfg.validate_spec(to);
  if (!to.dominates(from)) {
    throw std::invalid_argument("grow: target spec " + to.str() + " does not dominate source " +
                                from.str());
  }
  if (store_depth(w_small) != from.depth) {
    throw std::invalid_argument("grow: source store depth " + std::to_string(store_depth(w_small)) +
                                " does not match spec " + from.str());
  }
  const bool is_mogrow = kind == GrowthOperatorKind::mogrow;
  if (is_mogrow) {
    if (momentum == nullptr) {
      throw std::invalid_argument("grow: MoGrow requires a momentum state");
    }
    if (momentum->ema.names() != w_small.names()) {
      throw std::invalid_argument("grow: momentum copy does not mirror the online parameters");
    }
  }
  const ParamStore& src = is_mogrow ? momentum->ema : w_small;

  GrowthResult result;
  const int l_s = from.depth, l_l = to.depth;

  for (const auto& [name, t] : src) {
    if (name.starts_with("block")) continue;
    if (name == "pos_embed" && to.grid != from.grid) {
      const int src_grid = pe_grid_of(t);
      NoGradGuard ng;
      Tensor grown_pe = ops::interpolate_pos_encoding(t, src_grid, to.grid);
      result.params.add(name, grown_pe.clone(/*requires_grad=*/true));
      result.reset_names.push_back(name);
      continue;
    }
    result.params.add(name, t.clone(/*requires_grad=*/true));
    if (is_mogrow) result.reset_names.push_back(name);
  }

  for (int j = 0; j < l_l; ++j) {
    const int cls_index = l_l - 1 - j;
    const DepthSource s = depth_map(kind, cls_index, l_s, l_l);
    if (s.fresh) {
      for (const auto& def : block_param_shapes(cfg, j)) {
        result.params.add(def.name, init_param(def.name, def.shape, seed));
      }
      continue;
    }
    const int src_exec = l_s - 1 - s.index;
    std::vector<std::string> created = copy_block(src, src_exec, result.params, j);
    const bool same_slot = src_exec == j;
    if (kind == GrowthOperatorKind::identity && !interpolation_run_original(cls_index, l_s, l_l)) {
      const std::string scale_name = block_prefix(j) + "/res_scale";
      if (result.params.has(scale_name)) result.params.remove(scale_name);
      result.params.add(scale_name, Tensor::zeros({1}, /*requires_grad=*/true));
    }
    if (is_mogrow || !same_slot) {
      for (std::string& name : created) result.reset_names.push_back(std::move(name));
    }
  }

  return result;
}

}  // namespace autoprog
