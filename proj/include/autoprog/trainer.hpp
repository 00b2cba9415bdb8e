// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "autoprog/checkpoint.hpp"
#include "autoprog/config.hpp"
#include "autoprog/cost.hpp"
#include "autoprog/dataset.hpp"
#include "autoprog/metrics.hpp"
#include "autoprog/search.hpp"
#include "autoprog/supernet.hpp"

namespace autoprog {

struct TrainOutcome {
  ParamStore params;
  SubNetSpec final_spec;
  std::vector<MetricRecord> metrics;
  std::vector<SubNetSpec> realized_schedule;
  std::vector<SearchReportRecord> search_report;
  int growth_events = 0;
  double cumulative_flops = 0.0;
  std::uint64_t optimizer_steps = 0;
  int optimizer_epochs = 0;
};

// Regular training of the full model for |t| epochs.
TrainOutcome train_baseline(const RunConfig& cfg, const Dataset& data);

// Staged training along the uniform linear schedule; grows with cfg.zeta at
// every stage boundary where the spec changes.
TrainOutcome train_prog(const RunConfig& cfg, const Dataset& data);

// Staged training along an explicit schedule (retraining a searched
// schedule); consumes no supernet epochs.
TrainOutcome train_prog_with_schedule(const RunConfig& cfg, const Dataset& data,
                                      const std::vector<SubNetSpec>& schedule);

// Automated progressive learning: per stage, grow into the elastic supernet,
// train it with one sampled sub-network per step, search the stage space,
// inherit the chosen sub-network's weights, and train it for the rest of the
// stage. Consumes exactly |t| optimizer epochs.
TrainOutcome train_autoprog(const RunConfig& cfg, const Dataset& data);

// Traversal search over the supernet's candidates: mean training loss on the
// fixed subset times cost^alpha, ties toward the smaller cost. The subset
// images arrive at full resolution with the fixed augmentation already
// applied; each candidate is evaluated at its own grid.
SubNetSpec search_stage(const ElasticSupernet& supernet, const Tensor& subset_images,
                        const std::vector<int>& subset_labels, const SearchConfig& search_cfg,
                        const CostModel& cost_model, int stage,
                        std::vector<SearchReportRecord>* report, double* flops_accum);

// Top-1 accuracy on a split. grid 0 evaluates at the checkpoint's native
// grid; other values resize the input and interpolate the positional
// encoding on the fly.
double evaluate(const ParamStore& params, const ModelConfig& cfg, const Split& split,
                int grid = 0, int eval_batch = 250);

// Persists checkpoint.bin, metrics.jsonl, schedule.txt and
// search_report.jsonl (when present) under cfg.out_dir.
void write_outcome(const RunConfig& cfg, const TrainOutcome& outcome);

}  // namespace autoprog
