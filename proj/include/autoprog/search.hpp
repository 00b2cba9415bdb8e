// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "autoprog/cost.hpp"
#include "autoprog/model.hpp"

namespace autoprog {

struct CandidateScore {
  SubNetSpec spec;
  double loss = 0.0;
  double cost = 0.0;
  double score = 0.0;
  bool chosen = false;
};

struct SearchConfig {
  bool alpha_balanced = true;   // dynamic range-matching alpha
  double alpha_fixed = 0.0;     // used when alpha_balanced is false
  int eval_subset = 256;        // training samples scored per candidate
  std::uint64_t eval_seed = 1;  // subset selection + fixed augmentation
  int supernet_epochs = 2;

  void validate() const;
};

// Balancing exponent: the dynamic range of T^alpha matches the dynamic range
// of L across candidates, alpha = ln(L_max/L_min) / ln(T_max/T_min).
// Degenerate ranges give alpha = 0. Requires >= 2 candidates with positive
// losses and costs.
double compute_alpha(const std::vector<std::pair<double, double>>& loss_cost);

// Scores candidates by L * T^alpha and marks the argmin, ties broken toward
// the smaller cost. Returns the index of the chosen candidate and fills
// `score`/`chosen` in place.
std::size_t pick_candidate(std::vector<CandidateScore>& candidates, const SearchConfig& cfg,
                           double* alpha_out = nullptr);

}  // namespace autoprog
