// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "autoprog/model.hpp"

namespace autoprog {

// One line of the metric stream; epochs are 1-based, phase is "sub" for
// ordinary sub-network epochs and "supernet" for sampled supernet epochs.
struct MetricRecord {
  int epoch = 0;
  int stage = 0;
  SubNetSpec spec;
  std::string phase = "sub";
  double train_loss = 0.0;
  double eval_acc = 0.0;
  double step_flops = 0.0;
  double cumulative_flops = 0.0;
  double wall_seconds = 0.0;
};

std::string to_json_line(const MetricRecord& rec);
MetricRecord metric_from_json_line(const std::string& line);
std::vector<MetricRecord> load_metrics(const std::string& path);

// One candidate row of a per-stage search report. `loss`, `alpha` and
// `score` are meaningful only when `evaluated` is true (singleton stage
// spaces skip evaluation).
struct SearchReportRecord {
  int stage = 0;
  SubNetSpec spec;
  bool evaluated = true;
  double loss = 0.0;
  double cost = 0.0;
  double alpha = 0.0;
  double score = 0.0;
  bool chosen = false;
};

std::string to_json_line(const SearchReportRecord& rec);
SearchReportRecord search_record_from_json_line(const std::string& line);
std::vector<SearchReportRecord> load_search_report(const std::string& path);

// Append-only JSONL writer; flushes after every record.
class JsonlWriter {
 public:
  JsonlWriter() = default;
  explicit JsonlWriter(const std::string& path);
  bool open() const { return out_.is_open(); }
  void append(const std::string& json_line);

 private:
  std::ofstream out_;
};

}  // namespace autoprog
