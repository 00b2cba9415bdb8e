// SPDX-License-Identifier: Apache-2.0
#include "autoprog/metrics.hpp"

#include <json.hpp>

#include <stdexcept>

namespace autoprog {

using nlohmann::json;

std::string to_json_line(const MetricRecord& rec) {
  json j{{"epoch", rec.epoch},
         {"stage", rec.stage},
         {"depth", rec.spec.depth},
         {"grid", rec.spec.grid},
         {"phase", rec.phase},
         {"train_loss", rec.train_loss},
         {"eval_acc", rec.eval_acc},
         {"step_flops", rec.step_flops},
         {"cumulative_flops", rec.cumulative_flops},
         {"wall_seconds", rec.wall_seconds}};
  return j.dump();
}

MetricRecord metric_from_json_line(const std::string& line) {
  const json j = json::parse(line);
  MetricRecord rec;
  rec.epoch = j.at("epoch").get<int>();
  rec.stage = j.at("stage").get<int>();
  rec.spec.depth = j.at("depth").get<int>();
  rec.spec.grid = j.at("grid").get<int>();
  rec.phase = j.at("phase").get<std::string>();
  rec.train_loss = j.at("train_loss").get<double>();
  rec.eval_acc = j.at("eval_acc").get<double>();
  rec.step_flops = j.at("step_flops").get<double>();
  rec.cumulative_flops = j.at("cumulative_flops").get<double>();
  rec.wall_seconds = j.at("wall_seconds").get<double>();
  return rec;
}

std::vector<MetricRecord> load_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics file: " + path);
  std::vector<MetricRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(metric_from_json_line(line));
  }
  return out;
}

std::string to_json_line(const SearchReportRecord& rec) {
  json j{{"stage", rec.stage},
         {"depth", rec.spec.depth},
         {"grid", rec.spec.grid},
         {"cost", rec.cost},
         {"chosen", rec.chosen}};
  if (rec.evaluated) {
    j["loss"] = rec.loss;
    j["alpha"] = rec.alpha;
    j["score"] = rec.score;
  } else {
    j["loss"] = nullptr;
    j["alpha"] = nullptr;
    j["score"] = nullptr;
  }
  return j.dump();
}

SearchReportRecord search_record_from_json_line(const std::string& line) {
  const json j = json::parse(line);
  SearchReportRecord rec;
  rec.stage = j.at("stage").get<int>();
  rec.spec.depth = j.at("depth").get<int>();
  rec.spec.grid = j.at("grid").get<int>();
  rec.cost = j.at("cost").get<double>();
  rec.chosen = j.at("chosen").get<bool>();
  rec.evaluated = !j.at("loss").is_null();
  if (rec.evaluated) {
    rec.loss = j.at("loss").get<double>();
    rec.alpha = j.at("alpha").get<double>();
    rec.score = j.at("score").get<double>();
  }
  return rec;
}

std::vector<SearchReportRecord> load_search_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open search report: " + path);
  std::vector<SearchReportRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(search_record_from_json_line(line));
  }
  return out;
}

JsonlWriter::JsonlWriter(const std::string& path) : out_(path, std::ios::app) {
  if (!out_) throw std::runtime_error("cannot open metrics stream for append: " + path);
}

void JsonlWriter::append(const std::string& json_line) {
  out_ << json_line << '\n';
  out_.flush();
  if (!out_) throw std::runtime_error("failed appending to metrics stream");
}

}  // namespace autoprog
