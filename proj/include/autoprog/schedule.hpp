// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "autoprog/model.hpp"

namespace autoprog {

// Stage accounting: |k| equispaced stages of tau = |t| / |k| epochs, the
// first supernet_epochs of each stage reserved for supernet training when
// searching.
struct StagePlan {
  int total_epochs = 32;
  int stages = 4;
  int supernet_epochs = 2;

  int epochs_per_stage() const { return total_epochs / stages; }
  void validate() const;
};

// Ratio ladder and the candidate depth/grid values it induces. Candidate
// lists are rounded to the nearest integer (minimum 1), deduplicated, and
// sorted ascending.
struct GrowthSpace {
  std::vector<double> ratios;
  std::vector<int> depths;
  std::vector<int> grids;
};

int scaled_dim(double ratio, int full);

// Equispaced ladder from s1 to 1.0 with `stages` rungs.
GrowthSpace build_growth_space(const ModelConfig& cfg, double s1, int stages);

// Stage k uses ratio rung k for both depth and grid; the last stage is the
// full model by construction. Duplicate consecutive specs are kept.
std::vector<SubNetSpec> uniform_linear_schedule(const ModelConfig& cfg, const GrowthSpace& space);

void validate_schedule(const std::vector<SubNetSpec>& schedule, const ModelConfig& cfg);

// Per-stage growth space Lambda_k. Stage 1 combines the smallest, medium
// (upper-median rung) and largest candidates of depth and grid; later stages
// take the previous optimum plus the next 3 depth and next 1 grid candidates
// (all remaining when fewer). Members failing the parameter-count filter
// |w(spec)| >= |w(prev_best)| are dropped. stage_index is 1-based.
std::vector<SubNetSpec> build_stage_space(const GrowthSpace& space, int stage_index,
                                          const SubNetSpec& prev_best, const ModelConfig& cfg);

// Componentwise minimum / maximum of a non-empty candidate set.
SubNetSpec min_spec(const std::vector<SubNetSpec>& specs);
SubNetSpec max_spec(const std::vector<SubNetSpec>& specs);

// Linear intensity ramp for a regularizer across the stage ratio.
struct AdaRegRange {
  float min = 0.0f;
  float max = 0.0f;
};

struct AdaRegConfig {
  AdaRegRange drop_path{0.0f, 0.1f};
  AdaRegRange input_noise{0.0f, 0.0f};
};

struct AdaRegIntensities {
  float drop_path = 0.0f;
  float input_noise = 0.0f;
};

// intensity(s) = min + (max-min) * (s-s1)/(1-s1), clamped to [min, max].
// The degenerate ladder s1 == 1 yields the maxima (regular training uses the
// full regularization strength).
float adareg_intensity(const AdaRegRange& range, double s1, double s);
AdaRegIntensities adareg_intensities(const AdaRegConfig& cfg, double s1, double s);

// Line-oriented schedule serialization: one "stage depth grid" record per
// line, stages numbered from 1.
std::string encode_schedule(const std::vector<SubNetSpec>& schedule);
std::vector<SubNetSpec> decode_schedule(const std::string& text);
void save_schedule(const std::string& path, const std::vector<SubNetSpec>& schedule);
std::vector<SubNetSpec> load_schedule(const std::string& path);

}  // namespace autoprog
