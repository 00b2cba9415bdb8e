// SPDX-License-Identifier: Apache-2.0
//
// Double-precision reference forward of the toy ViT, independent of the
// library's graph machinery; the finite-difference oracle for the composite
// gradient check.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "autoprog/model.hpp"
#include "reference_ops.hpp"

namespace refvit {

using DParams = std::map<std::string, refops::DTensor>;

DParams from_store(const autoprog::ParamStore& store);

// Mean cross-entropy of the reference forward (evaluation graph: no
// stochastic regularizers).
double loss(const DParams& params, const autoprog::ModelConfig& cfg,
            const autoprog::SubNetSpec& spec, const refops::DTensor& batch,
            const std::vector<int>& labels);

struct FdSummary {
  int checked = 0;
  double max_rel = 0.0;
  double mean_rel = 0.0;
};

// Central differences (perturbation 1e-3 * parameter scale) of the reference
// loss against the library's analytic fp32 gradients over `samples` randomly
// chosen parameters. Gradients must already be populated on `store`.
FdSummary fd_check_params(autoprog::ParamStore& store, const autoprog::ModelConfig& cfg,
                          const autoprog::SubNetSpec& spec, const autoprog::Tensor& batch,
                          const std::vector<int>& labels, int samples, std::uint64_t seed,
                          double tol, bool* ok);

}  // namespace refvit
