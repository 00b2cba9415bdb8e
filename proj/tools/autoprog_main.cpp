// SPDX-License-Identifier: Apache-2.0
//
// Command-line runner: train / eval / plot.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "autoprog/trainer.hpp"

namespace {

using namespace autoprog;

int cmd_train(const std::string& config_path, const std::string& mode_flag,
              const std::string& schedule_path, long long seed_flag, const std::string& out_flag,
              bool quiet) {
  RunConfig cfg = load_config(config_path);
  if (!mode_flag.empty()) cfg.mode = run_mode_from_string(mode_flag);
  if (seed_flag >= 0) cfg.seed = static_cast<std::uint64_t>(seed_flag);
  if (!out_flag.empty()) cfg.out_dir = out_flag;
  cfg.verbose = !quiet;
  cfg.validate();

  const Dataset data = ingest_dataset(cfg.dataset);
  std::printf("dataset: %d train / %d eval images, %d classes, side %d\n", data.train.count(),
              data.eval.count(), data.train.classes, data.train.side);

  TrainOutcome outcome;
  if (!schedule_path.empty()) {
    if (cfg.mode == RunMode::baseline) {
      throw std::invalid_argument("--schedule is only meaningful for prog/autoprog runs");
    }
    std::vector<SubNetSpec> schedule = load_schedule(schedule_path);
    cfg.plan.stages = static_cast<int>(schedule.size());
    cfg.validate();
    outcome = train_prog_with_schedule(cfg, data, schedule);
  } else {
    switch (cfg.mode) {
      case RunMode::baseline: outcome = train_baseline(cfg, data); break;
      case RunMode::prog: outcome = train_prog(cfg, data); break;
      case RunMode::autoprog: outcome = train_autoprog(cfg, data); break;
    }
  }

  const double final_acc = outcome.metrics.empty() ? 0.0 : outcome.metrics.back().eval_acc;
  std::printf("done: %d epochs, %llu optimizer steps, %.3e training flops, final top-1 %.4f\n",
              outcome.optimizer_epochs, static_cast<unsigned long long>(outcome.optimizer_steps),
              outcome.cumulative_flops, final_acc);
  if (!cfg.out_dir.empty()) {
    std::printf("artifacts written to %s\n", cfg.out_dir.c_str());
  }
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, int grid) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const RunConfig cfg = parse_config(ckpt.config_text);
  const Dataset data = ingest_dataset(cfg.dataset);
  const int native = pe_grid_of(ckpt.params.at("pos_embed"));
  const double acc = evaluate(ckpt.params, cfg.model, data.eval, grid);
  std::printf("top-1 %.4f on %d eval images (grid %d, native %d, depth %d)\n", acc,
              data.eval.count(), grid > 0 ? grid : native, native, store_depth(ckpt.params));
  return 0;
}

std::string svg_learning_curve(const std::vector<MetricRecord>& metrics) {
  const int w = 720, h = 420, ml = 60, mr = 20, mt = 20, mb = 50;
  const double px = w - ml - mr, py = h - mt - mb;
  const int epochs = metrics.back().epoch;
  double max_loss = 0.0;
  for (const auto& m : metrics) max_loss = std::max(max_loss, m.train_loss);
  if (max_loss <= 0.0) max_loss = 1.0;

  auto x_of = [&](double e) { return ml + px * (epochs > 1 ? (e - 1) / (epochs - 1) : 0.5); };
  auto y_acc = [&](double a) { return mt + py * (1.0 - a); };
  auto y_loss = [&](double l) { return mt + py * (1.0 - l / max_loss); };

  std::string acc_pts, loss_pts;
  for (const auto& m : metrics) {
    acc_pts += std::to_string(x_of(m.epoch)) + "," + std::to_string(y_acc(m.eval_acc)) + " ";
    loss_pts += std::to_string(x_of(m.epoch)) + "," + std::to_string(y_loss(m.train_loss)) + " ";
  }

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) +
         "\" height=\"" + std::to_string(h) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (int i = 0; i <= 10; ++i) {
    const double y = mt + py * i / 10.0;
    svg += "<line x1=\"" + std::to_string(ml) + "\" y1=\"" + std::to_string(y) + "\" x2=\"" +
           std::to_string(w - mr) + "\" y2=\"" + std::to_string(y) +
           "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    char label[16];
    std::snprintf(label, sizeof(label), "%.1f", 1.0 - i / 10.0);
    svg += "<text x=\"" + std::to_string(ml - 8) + "\" y=\"" + std::to_string(y + 4) +
           "\" font-size=\"12\" text-anchor=\"end\">" + label + "</text>\n";
  }
  svg += "<polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" points=\"" + loss_pts +
         "\"/>\n";
  svg += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"" + acc_pts +
         "\"/>\n";
  svg += "<text x=\"" + std::to_string(ml + 10) + "\" y=\"" + std::to_string(mt + 16) +
         "\" font-size=\"13\" fill=\"#1f77b4\">eval accuracy</text>\n";
  svg += "<text x=\"" + std::to_string(ml + 10) + "\" y=\"" + std::to_string(mt + 34) +
         "\" font-size=\"13\" fill=\"#d62728\">train loss / " + std::to_string(max_loss) +
         "</text>\n";
  svg += "<text x=\"" + std::to_string(w / 2) + "\" y=\"" + std::to_string(h - 12) +
         "\" font-size=\"13\" text-anchor=\"middle\">epoch (1.." + std::to_string(epochs) +
         ")</text>\n";
  svg += "</svg>\n";
  return svg;
}

int cmd_plot(const std::string& metrics_path, std::string out_path) {
  const std::vector<MetricRecord> metrics = load_metrics(metrics_path);
  if (metrics.empty()) {
    std::fprintf(stderr, "no records in %s\n", metrics_path.c_str());
    return 1;
  }
  // text curve
  constexpr int kRows = 12, kCols = 64;
  std::vector<std::string> canvas(kRows, std::string(kCols, ' '));
  const int epochs = metrics.back().epoch;
  for (const auto& m : metrics) {
    const int col = std::min(kCols - 1, (m.epoch - 1) * kCols / std::max(1, epochs));
    const int row = std::min(kRows - 1, static_cast<int>((1.0 - m.eval_acc) * kRows));
    canvas[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)] = '*';
  }
  std::printf("eval accuracy vs epoch (top = 1.0)\n");
  for (const std::string& row : canvas) std::printf("|%s|\n", row.c_str());
  std::printf("+%s+\n", std::string(kCols, '-').c_str());
  std::printf("%-8s %-8s %-12s %-10s %-10s %-14s\n", "epoch", "stage", "spec", "loss", "acc",
              "cum_flops");
  for (const auto& m : metrics) {
    std::printf("%-8d %-8d %-12s %-10.4f %-10.4f %-14.4e\n", m.epoch, m.stage,
                m.spec.str().c_str(), m.train_loss, m.eval_acc, m.cumulative_flops);
  }

  if (out_path.empty()) out_path = metrics_path + ".svg";
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) {
    std::fprintf(stderr, "cannot write %s\n", out_path.c_str());
    return 1;
  }
  out << svg_learning_curve(metrics);
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"progressive ViT training (baseline / prog / autoprog)"};
  app.require_subcommand(1);

  std::string config_path, mode_flag, schedule_path, out_flag;
  long long seed_flag = -1;
  bool quiet = false;
  CLI::App* train = app.add_subcommand("train", "run a training experiment");
  train->add_option("--config", config_path, "config file")->required();
  train->add_option("--mode", mode_flag, "baseline|prog|autoprog (overrides config)");
  train->add_option("--schedule", schedule_path, "retrain along a saved growth schedule");
  train->add_option("--seed", seed_flag, "seed override");
  train->add_option("--out", out_flag, "output directory override");
  train->add_flag("--quiet", quiet, "suppress per-epoch progress lines");

  std::string checkpoint_path;
  int grid = 0;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  eval_cmd->add_option("--grid", grid, "evaluation patch-grid side (default: native)");

  std::string metrics_path, plot_out;
  CLI::App* plot = app.add_subcommand("plot", "render a learning curve from a metric stream");
  plot->add_option("--metrics", metrics_path, "metrics.jsonl file")->required();
  plot->add_option("--out", plot_out, "output SVG path (default: <metrics>.svg)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      return cmd_train(config_path, mode_flag, schedule_path, seed_flag, out_flag, quiet);
    }
    if (eval_cmd->parsed()) return cmd_eval(checkpoint_path, grid);
    if (plot->parsed()) return cmd_plot(metrics_path, plot_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
