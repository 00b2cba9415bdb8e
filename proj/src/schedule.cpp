// SPDX-License-Identifier: Apache-2.0
#include "autoprog/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace autoprog {

void StagePlan::validate() const {
  if (total_epochs < 0 || stages < 1 || supernet_epochs < 0) {
    throw std::invalid_argument("StagePlan: negative fields");
  }
  if (total_epochs % stages != 0) {
    throw std::invalid_argument("StagePlan: stage count " + std::to_string(stages) +
                                " does not divide total epochs " + std::to_string(total_epochs));
  }
  // |t| = 0 is the untrained-checkpoint degenerate case
  if (total_epochs > 0 && epochs_per_stage() < supernet_epochs + 1) {
    throw std::invalid_argument("StagePlan: epochs per stage " +
                                std::to_string(epochs_per_stage()) +
                                " must be at least supernet epochs + 1");
  }
}

int scaled_dim(double ratio, int full) {
  return std::max(1, static_cast<int>(std::lround(ratio * full)));
}

GrowthSpace build_growth_space(const ModelConfig& cfg, double s1, int stages) {
  if (!(s1 > 0.0) || s1 > 1.0) {
    throw std::invalid_argument("build_growth_space: s1 must be in (0, 1], got " +
                                std::to_string(s1));
  }
  if (stages < 1) throw std::invalid_argument("build_growth_space: need at least one stage");
  if (stages == 1 && s1 != 1.0) {
    throw std::invalid_argument("build_growth_space: a single stage must use s1 = 1");
  }
  GrowthSpace space;
  if (s1 == 1.0) {
    space.ratios.assign(static_cast<std::size_t>(stages), 1.0);
  } else {
    for (int i = 0; i < stages; ++i) {
      space.ratios.push_back(s1 + (1.0 - s1) * i / (stages - 1));
    }
    space.ratios.back() = 1.0;
  }
  auto fill = [&](std::vector<int>& dst, int full) {
    for (double s : space.ratios) dst.push_back(scaled_dim(s, full));
    std::sort(dst.begin(), dst.end());
    dst.erase(std::unique(dst.begin(), dst.end()), dst.end());
  };
  fill(space.depths, cfg.max_depth);
  fill(space.grids, cfg.max_grid);
  return space;
}

std::vector<SubNetSpec> uniform_linear_schedule(const ModelConfig& cfg, const GrowthSpace& space) {
  std::vector<SubNetSpec> schedule;
  for (double s : space.ratios) {
    schedule.push_back({scaled_dim(s, cfg.max_depth), scaled_dim(s, cfg.max_grid)});
  }
  validate_schedule(schedule, cfg);
  return schedule;
}

void validate_schedule(const std::vector<SubNetSpec>& schedule, const ModelConfig& cfg) {
  if (schedule.empty()) throw std::invalid_argument("growth schedule is empty");
  for (const SubNetSpec& spec : schedule) cfg.validate_spec(spec);
  for (std::size_t i = 1; i < schedule.size(); ++i) {
    if (!schedule[i].dominates(schedule[i - 1])) {
      throw std::invalid_argument("growth schedule is not componentwise non-decreasing at stage " +
                                  std::to_string(i + 1));
    }
  }
  if (!(schedule.back() == cfg.full_spec())) {
    throw std::invalid_argument("growth schedule must end at the full model " +
                                cfg.full_spec().str() + ", got " + schedule.back().str());
  }
}

namespace {

// Smallest, medium (upper-median rung), largest; deduplicated.
std::vector<int> stage1_picks(const std::vector<int>& ladder) {
  std::vector<int> picks{ladder.front(), ladder[ladder.size() / 2], ladder.back()};
  std::sort(picks.begin(), picks.end());
  picks.erase(std::unique(picks.begin(), picks.end()), picks.end());
  return picks;
}

// `current` plus up to `extra` next-larger ladder entries.
std::vector<int> next_picks(const std::vector<int>& ladder, int current, int extra) {
  std::vector<int> picks{current};
  for (int v : ladder) {
    if (v > current && extra > 0) {
      picks.push_back(v);
      --extra;
    }
  }
  return picks;
}

}  // namespace

std::vector<SubNetSpec> build_stage_space(const GrowthSpace& space, int stage_index,
                                          const SubNetSpec& prev_best, const ModelConfig& cfg) {
  if (stage_index < 1) throw std::invalid_argument("build_stage_space: stage index is 1-based");
  cfg.validate_spec(prev_best);
  std::vector<int> depths, grids;
  if (stage_index == 1) {
    depths = stage1_picks(space.depths);
    grids = stage1_picks(space.grids);
  } else {
    depths = next_picks(space.depths, prev_best.depth, 3);
    grids = next_picks(space.grids, prev_best.grid, 1);
  }
  const std::size_t floor_count = param_count(cfg, prev_best);
  std::vector<SubNetSpec> lambda;
  for (int depth : depths) {
    for (int grid : grids) {
      SubNetSpec spec{depth, grid};
      if (param_count(cfg, spec) >= floor_count) lambda.push_back(spec);
    }
  }
  if (lambda.empty()) {
    throw std::logic_error("build_stage_space: empty stage growth space");
  }
  return lambda;
}

SubNetSpec min_spec(const std::vector<SubNetSpec>& specs) {
  if (specs.empty()) throw std::invalid_argument("min_spec: empty candidate set");
  SubNetSpec m = specs.front();
  for (const SubNetSpec& s : specs) {
    m.depth = std::min(m.depth, s.depth);
    m.grid = std::min(m.grid, s.grid);
  }
  return m;
}

SubNetSpec max_spec(const std::vector<SubNetSpec>& specs) {
  if (specs.empty()) throw std::invalid_argument("max_spec: empty candidate set");
  SubNetSpec m = specs.front();
  for (const SubNetSpec& s : specs) {
    m.depth = std::max(m.depth, s.depth);
    m.grid = std::max(m.grid, s.grid);
  }
  return m;
}

float adareg_intensity(const AdaRegRange& range, double s1, double s) {
  if (s1 >= 1.0) return range.max;
  const double t = std::clamp((s - s1) / (1.0 - s1), 0.0, 1.0);
  return static_cast<float>(range.min + (range.max - range.min) * t);
}

AdaRegIntensities adareg_intensities(const AdaRegConfig& cfg, double s1, double s) {
  return {adareg_intensity(cfg.drop_path, s1, s), adareg_intensity(cfg.input_noise, s1, s)};
}

std::string encode_schedule(const std::vector<SubNetSpec>& schedule) {
  std::ostringstream out;
  out << "# autoprog-schedule v1\n";
  out << "# stage depth grid\n";
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    out << (i + 1) << ' ' << schedule[i].depth << ' ' << schedule[i].grid << '\n';
  }
  return out.str();
}

std::vector<SubNetSpec> decode_schedule(const std::string& text) {
  std::istringstream in(text);
  std::vector<SubNetSpec> schedule;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    int stage = 0;
    SubNetSpec spec;
    std::string rest;
    if (!(fields >> stage >> spec.depth >> spec.grid) || (fields >> rest)) {
      throw std::runtime_error("schedule line " + std::to_string(line_no) +
                               ": expected \"stage depth grid\", got \"" + line + "\"");
    }
    if (stage != static_cast<int>(schedule.size()) + 1) {
      throw std::runtime_error("schedule line " + std::to_string(line_no) + ": expected stage " +
                               std::to_string(schedule.size() + 1) + ", got " +
                               std::to_string(stage));
    }
    if (spec.depth < 1 || spec.grid < 1) {
      throw std::runtime_error("schedule line " + std::to_string(line_no) +
                               ": depth and grid must be positive");
    }
    schedule.push_back(spec);
  }
  if (schedule.empty()) throw std::runtime_error("schedule file holds no stages");
  return schedule;
}

void save_schedule(const std::string& path, const std::vector<SubNetSpec>& schedule) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open schedule file for writing: " + path);
  out << encode_schedule(schedule);
  if (!out) throw std::runtime_error("failed writing schedule file: " + path);
}

std::vector<SubNetSpec> load_schedule(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open schedule file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_schedule(buf.str());
}

}  // namespace autoprog
