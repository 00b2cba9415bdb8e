// SPDX-License-Identifier: Apache-2.0
#include "autoprog/supernet.hpp"

#include <algorithm>
#include <stdexcept>

#include "autoprog/schedule.hpp"

namespace autoprog {

namespace {

// Aliases every tensor of the physical block into `dst` under the new
// prefix; handles share storage with the supernet.
void alias_block(const ParamStore& src, int physical, ParamStore& dst, const std::string& prefix) {
  const std::string from = block_prefix(physical) + "/";
  for (const auto& [name, t] : src) {
    if (name.starts_with(from)) dst.add(prefix + name.substr(from.size()), t);
  }
}

}  // namespace

ElasticSupernet::ElasticSupernet(const ParamStore& w_star, const SubNetSpec& base,
                                 std::vector<SubNetSpec> lambda, GrowthOperatorKind kind,
                                 const MomentumState* momentum, const ModelConfig& cfg,
                                 std::uint64_t seed)
    : cfg_(cfg), base_(base), lambda_(std::move(lambda)) {
  if (lambda_.empty()) {
    throw std::invalid_argument("ElasticSupernet: empty stage growth space");
  }
  std::sort(lambda_.begin(), lambda_.end(), [](const SubNetSpec& a, const SubNetSpec& b) {
    return a.depth != b.depth ? a.depth < b.depth : a.grid < b.grid;
  });
  lambda_.erase(std::unique(lambda_.begin(), lambda_.end()), lambda_.end());
  for (const SubNetSpec& spec : lambda_) {
    if (!spec.dominates(base_)) {
      throw std::invalid_argument("ElasticSupernet: candidate " + spec.str() +
                                  " is smaller than the base spec " + base_.str());
    }
  }
  largest_ = max_spec(lambda_);
  GrowthResult grown = grow(kind, w_star, cfg_, base_, largest_, momentum, seed);
  params_ = std::move(grown.params);
  reset_names_ = std::move(grown.reset_names);

  const int l_b = base_.depth, l_l = largest_.depth;
  always_active_.assign(static_cast<std::size_t>(l_l), false);
  // gap -> optional physical indices, nearest the gap's base layer first
  std::vector<std::vector<int>> per_gap(static_cast<std::size_t>(l_b));
  for (int cls = 0; cls < l_l; ++cls) {
    const int physical = l_l - 1 - cls;
    if (interpolation_run_original(cls, l_b, l_l)) {
      always_active_[static_cast<std::size_t>(physical)] = true;
    } else {
      const int gap = (cls * l_b) / l_l;
      per_gap[static_cast<std::size_t>(gap)].push_back(physical);
    }
  }
  // one optional per gap per pass, starting from the gap nearest the
  // classifier
  for (std::size_t pass = 0;; ++pass) {
    bool any = false;
    for (auto& gap : per_gap) {
      if (pass < gap.size()) {
        optional_order_.push_back(gap[pass]);
        any = true;
      }
    }
    if (!any) break;
  }
}

bool ElasticSupernet::layer_always_active(int physical) const {
  if (physical < 0 || physical >= static_cast<int>(always_active_.size())) {
    throw std::out_of_range("ElasticSupernet: layer index " + std::to_string(physical) +
                            " out of range");
  }
  return always_active_[static_cast<std::size_t>(physical)];
}

void ElasticSupernet::require_candidate(const SubNetSpec& spec) const {
  if (std::find(lambda_.begin(), lambda_.end(), spec) == lambda_.end()) {
    throw std::invalid_argument("ElasticSupernet: spec " + spec.str() +
                                " is not in the stage growth space");
  }
}

std::vector<int> ElasticSupernet::active_layers_for(int depth) const {
  std::vector<int> active;
  for (int j = 0; j < largest_.depth; ++j) {
    if (always_active_[static_cast<std::size_t>(j)]) active.push_back(j);
  }
  const int extra = depth - base_.depth;
  for (int i = 0; i < extra; ++i) active.push_back(optional_order_[static_cast<std::size_t>(i)]);
  std::sort(active.begin(), active.end());
  return active;
}

ActiveView ElasticSupernet::select(const SubNetSpec& spec) const {
  require_candidate(spec);
  ActiveView view;
  view.spec = spec;
  view.active_layers = active_layers_for(spec.depth);
  for (const auto& [name, t] : params_) {
    if (!name.starts_with("block")) {
      view.model_store.add(name, t);
      view.step_store.add(name, t);
    }
  }
  for (std::size_t i = 0; i < view.active_layers.size(); ++i) {
    const int physical = view.active_layers[i];
    alias_block(params_, physical, view.model_store, block_prefix(static_cast<int>(i)) + "/");
    alias_block(params_, physical, view.step_store, block_prefix(physical) + "/");
  }
  return view;
}

SubNetSpec ElasticSupernet::sample_subnet(Rng& rng) const {
  return lambda_[static_cast<std::size_t>(rng.uniform_below(lambda_.size()))];
}

ParamStore ElasticSupernet::export_subnet(const SubNetSpec& spec) const {
  ActiveView view = select(spec);
  ParamStore out;
  for (const auto& [name, t] : view.model_store) {
    if (name == "pos_embed") {
      const int pe_grid = pe_grid_of(t);
      if (pe_grid != spec.grid) {
        NoGradGuard ng;
        out.add(name, ops::interpolate_pos_encoding(t, pe_grid, spec.grid)
                          .clone(/*requires_grad=*/true));
        continue;
      }
    }
    out.add(name, t.clone(/*requires_grad=*/true));
  }
  return out;
}

std::vector<std::string> ElasticSupernet::view_param_names(const SubNetSpec& spec) const {
  ActiveView view = select(spec);
  return view.step_store.names();
}

}  // namespace autoprog
