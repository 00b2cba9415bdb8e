// SPDX-License-Identifier: Apache-2.0
#include "autoprog/search.hpp"

#include <cmath>
#include <stdexcept>

namespace autoprog {

void SearchConfig::validate() const {
  if (eval_subset < 1) throw std::invalid_argument("SearchConfig: eval_subset must be >= 1");
  if (supernet_epochs < 0) {
    throw std::invalid_argument("SearchConfig: supernet_epochs must be >= 0");
  }
  if (!alpha_balanced && alpha_fixed < 0.0) {
    throw std::invalid_argument("SearchConfig: fixed alpha must be non-negative");
  }
}

double compute_alpha(const std::vector<std::pair<double, double>>& loss_cost) {
  if (loss_cost.size() < 2) {
    throw std::invalid_argument("compute_alpha: need at least two candidates");
  }
  double lmin = loss_cost.front().first, lmax = lmin;
  double tmin = loss_cost.front().second, tmax = tmin;
  for (const auto& [l, t] : loss_cost) {
    if (!(l > 0.0) || !(t > 0.0)) {
      throw std::invalid_argument("compute_alpha: losses and costs must be positive");
    }
    lmin = std::min(lmin, l);
    lmax = std::max(lmax, l);
    tmin = std::min(tmin, t);
    tmax = std::max(tmax, t);
  }
  if (lmax == lmin || tmax == tmin) return 0.0;
  return std::log(lmax / lmin) / std::log(tmax / tmin);
}

std::size_t pick_candidate(std::vector<CandidateScore>& candidates, const SearchConfig& cfg,
                           double* alpha_out) {
  if (candidates.empty()) throw std::invalid_argument("pick_candidate: empty candidate set");
  double alpha = 0.0;
  if (candidates.size() == 1) {
    candidates[0].score = candidates[0].loss;
  } else {
    if (cfg.alpha_balanced) {
      std::vector<std::pair<double, double>> lc;
      lc.reserve(candidates.size());
      for (const CandidateScore& c : candidates) lc.emplace_back(c.loss, c.cost);
      alpha = compute_alpha(lc);
    } else {
      alpha = cfg.alpha_fixed;
    }
    for (CandidateScore& c : candidates) c.score = c.loss * std::pow(c.cost, alpha);
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const bool better = candidates[i].score < candidates[best].score ||
                        (candidates[i].score == candidates[best].score &&
                         candidates[i].cost < candidates[best].cost);
    if (better) best = i;
  }
  for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i].chosen = (i == best);
  if (alpha_out) *alpha_out = alpha;
  return best;
}

}  // namespace autoprog
