// SPDX-License-Identifier: Apache-2.0
#include "autoprog/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace autoprog {

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::baseline: return "baseline";
    case RunMode::prog: return "prog";
    case RunMode::autoprog: return "autoprog";
  }
  throw std::logic_error("unknown run mode");
}

RunMode run_mode_from_string(const std::string& s) {
  if (s == "baseline") return RunMode::baseline;
  if (s == "prog") return RunMode::prog;
  if (s == "autoprog") return RunMode::autoprog;
  throw std::invalid_argument("unknown mode \"" + s + "\" (baseline|prog|autoprog)");
}

void RunConfig::validate() const {
  model.validate();
  plan.validate();
  search.validate();
  if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
  if (!(s1 > 0.0) || s1 > 1.0) throw std::invalid_argument("config: s1 must be in (0, 1]");
  if (mode == RunMode::prog && !zeta_given) {
    throw std::invalid_argument("config: mode prog requires [growth] operator");
  }
  if (warmup_epochs < 0) throw std::invalid_argument("config: warmup_epochs must be >= 0");
  if (ema_momentum < 0.0f || ema_momentum > 1.0f) {
    throw std::invalid_argument("config: ema_momentum must be in [0, 1]");
  }
  if (optim.lr < 0.0f || optim.weight_decay < 0.0f) {
    throw std::invalid_argument("config: learning rate and weight decay must be non-negative");
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct Parser {
  RunConfig cfg;
  int line_no = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    throw std::invalid_argument("config line " + std::to_string(line_no) + ": " + msg);
  }

  double num(const std::string& v) const {
    try {
      std::size_t used = 0;
      const double x = std::stod(v, &used);
      if (used != v.size()) fail("trailing characters in number \"" + v + "\"");
      return x;
    } catch (const std::invalid_argument&) {
      fail("expected a number, got \"" + v + "\"");
    } catch (const std::out_of_range&) {
      fail("number out of range: \"" + v + "\"");
    }
  }

  int integer(const std::string& v) const {
    const double x = num(v);
    const int i = static_cast<int>(x);
    if (static_cast<double>(i) != x) fail("expected an integer, got \"" + v + "\"");
    return i;
  }

  std::uint64_t unsigned64(const std::string& v) const {
    try {
      std::size_t used = 0;
      const std::uint64_t x = std::stoull(v, &used);
      if (used != v.size()) fail("trailing characters in \"" + v + "\"");
      return x;
    } catch (const std::exception&) {
      fail("expected an unsigned integer, got \"" + v + "\"");
    }
  }

  void apply(const std::string& section, const std::string& key, const std::string& value) {
    if (section.empty()) {
      if (key == "mode") cfg.mode = run_mode_from_string(value);
      else if (key == "seed") cfg.seed = unsigned64(value);
      else if (key == "dataset") cfg.dataset = value;
      else if (key == "out") cfg.out_dir = value;
      else if (key == "batch_size") cfg.batch_size = integer(value);
      else fail("unknown key \"" + key + "\"");
      return;
    }
    if (section == "model") {
      if (key == "max_depth") cfg.model.max_depth = integer(value);
      else if (key == "max_grid") cfg.model.max_grid = integer(value);
      else if (key == "patch") cfg.model.patch = integer(value);
      else if (key == "embed_dim") cfg.model.embed_dim = integer(value);
      else if (key == "heads") cfg.model.heads = integer(value);
      else if (key == "mlp_ratio") cfg.model.mlp_ratio = static_cast<float>(num(value));
      else if (key == "classes") cfg.model.classes = integer(value);
      else fail("unknown key \"" + key + "\" in [model]");
      return;
    }
    if (section == "plan") {
      if (key == "epochs") cfg.plan.total_epochs = integer(value);
      else if (key == "stages") cfg.plan.stages = integer(value);
      else if (key == "supernet_epochs") {
        cfg.plan.supernet_epochs = integer(value);
        cfg.search.supernet_epochs = cfg.plan.supernet_epochs;
      } else if (key == "s1") cfg.s1 = num(value);
      else fail("unknown key \"" + key + "\" in [plan]");
      return;
    }
    if (section == "growth") {
      if (key == "operator") {
        cfg.zeta = growth_kind_from_string(value);
        cfg.zeta_given = true;
      } else fail("unknown key \"" + key + "\" in [growth]");
      return;
    }
    if (section == "optimizer") {
      if (key == "lr") cfg.optim.lr = static_cast<float>(num(value));
      else if (key == "beta1") cfg.optim.beta1 = static_cast<float>(num(value));
      else if (key == "beta2") cfg.optim.beta2 = static_cast<float>(num(value));
      else if (key == "eps") cfg.optim.eps = static_cast<float>(num(value));
      else if (key == "weight_decay") cfg.optim.weight_decay = static_cast<float>(num(value));
      else if (key == "warmup_epochs") cfg.warmup_epochs = integer(value);
      else if (key == "ema_momentum") cfg.ema_momentum = static_cast<float>(num(value));
      else fail("unknown key \"" + key + "\" in [optimizer]");
      return;
    }
    if (section == "search") {
      if (key == "eval_subset") cfg.search.eval_subset = integer(value);
      else if (key == "eval_seed") cfg.search.eval_seed = unsigned64(value);
      else if (key == "alpha") {
        if (value == "balanced") {
          cfg.search.alpha_balanced = true;
        } else {
          cfg.search.alpha_balanced = false;
          cfg.search.alpha_fixed = num(value);
        }
      } else fail("unknown key \"" + key + "\" in [search]");
      return;
    }
    if (section == "adareg") {
      if (key == "drop_path_min") cfg.adareg.drop_path.min = static_cast<float>(num(value));
      else if (key == "drop_path_max") cfg.adareg.drop_path.max = static_cast<float>(num(value));
      else if (key == "input_noise_min") cfg.adareg.input_noise.min = static_cast<float>(num(value));
      else if (key == "input_noise_max") cfg.adareg.input_noise.max = static_cast<float>(num(value));
      else fail("unknown key \"" + key + "\" in [adareg]");
      return;
    }
    fail("unknown section [" + section + "]");
  }
};

}  // namespace

RunConfig parse_config(const std::string& text) {
  Parser parser;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  while (std::getline(in, raw)) {
    ++parser.line_no;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') parser.fail("unterminated section header \"" + line + "\"");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) parser.fail("empty section name");
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) parser.fail("expected key = value, got \"" + line + "\"");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) parser.fail("empty key");
    if (value.empty()) parser.fail("empty value for key \"" + key + "\"");
    parser.apply(section, key, value);
  }
  parser.cfg.validate();
  return parser.cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  out << "mode = " << to_string(cfg.mode) << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "dataset = " << cfg.dataset << "\n";
  if (!cfg.out_dir.empty()) out << "out = " << cfg.out_dir << "\n";
  out << "batch_size = " << cfg.batch_size << "\n";
  out << "\n[model]\n";
  out << "max_depth = " << cfg.model.max_depth << "\n";
  out << "max_grid = " << cfg.model.max_grid << "\n";
  out << "patch = " << cfg.model.patch << "\n";
  out << "embed_dim = " << cfg.model.embed_dim << "\n";
  out << "heads = " << cfg.model.heads << "\n";
  out << "mlp_ratio = " << cfg.model.mlp_ratio << "\n";
  out << "classes = " << cfg.model.classes << "\n";
  out << "\n[plan]\n";
  out << "epochs = " << cfg.plan.total_epochs << "\n";
  out << "stages = " << cfg.plan.stages << "\n";
  out << "supernet_epochs = " << cfg.plan.supernet_epochs << "\n";
  out << "s1 = " << cfg.s1 << "\n";
  if (cfg.zeta_given) {
    out << "\n[growth]\n";
    out << "operator = " << to_string(cfg.zeta) << "\n";
  }
  out << "\n[optimizer]\n";
  out << "lr = " << cfg.optim.lr << "\n";
  out << "beta1 = " << cfg.optim.beta1 << "\n";
  out << "beta2 = " << cfg.optim.beta2 << "\n";
  out << "eps = " << cfg.optim.eps << "\n";
  out << "weight_decay = " << cfg.optim.weight_decay << "\n";
  out << "warmup_epochs = " << cfg.warmup_epochs << "\n";
  out << "ema_momentum = " << cfg.ema_momentum << "\n";
  out << "\n[search]\n";
  out << "eval_subset = " << cfg.search.eval_subset << "\n";
  out << "eval_seed = " << cfg.search.eval_seed << "\n";
  if (cfg.search.alpha_balanced) {
    out << "alpha = balanced\n";
  } else {
    out << "alpha = " << cfg.search.alpha_fixed << "\n";
  }
  out << "\n[adareg]\n";
  out << "drop_path_min = " << cfg.adareg.drop_path.min << "\n";
  out << "drop_path_max = " << cfg.adareg.drop_path.max << "\n";
  out << "input_noise_min = " << cfg.adareg.input_noise.min << "\n";
  out << "input_noise_max = " << cfg.adareg.input_noise.max << "\n";
  return out.str();
}

}  // namespace autoprog
