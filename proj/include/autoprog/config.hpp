// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "autoprog/growth.hpp"
#include "autoprog/model.hpp"
#include "autoprog/optimizer.hpp"
#include "autoprog/schedule.hpp"
#include "autoprog/search.hpp"

namespace autoprog {

enum class RunMode { baseline, prog, autoprog };

std::string to_string(RunMode mode);
RunMode run_mode_from_string(const std::string& s);

struct RunConfig {
  RunMode mode = RunMode::baseline;
  std::uint64_t seed = 1;
  std::string dataset = "synthetic(10,5000,32,7)";
  std::string out_dir;
  int batch_size = 100;

  ModelConfig model;
  StagePlan plan;
  double s1 = 0.5;

  GrowthOperatorKind zeta = GrowthOperatorKind::mogrow;
  bool zeta_given = false;

  SearchConfig search;

  OptimConfig optim;
  int warmup_epochs = 3;
  float ema_momentum = 0.998f;

  AdaRegConfig adareg;

  // Per-epoch progress lines on stdout; set by the CLI, not the config file.
  bool verbose = false;

  void validate() const;
};

// Key/value configuration with nested sections; unknown sections or keys are
// errors. parse/serialize round-trip.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
std::string serialize_config(const RunConfig& cfg);

}  // namespace autoprog
