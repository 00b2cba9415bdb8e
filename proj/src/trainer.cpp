// SPDX-License-Identifier: Apache-2.0
#include "autoprog/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <stdexcept>

namespace autoprog {

namespace {

constexpr std::uint64_t kShuffleTag = 0xda7a;
constexpr std::uint64_t kNoiseTag = 0x401e;
constexpr std::uint64_t kDropPathTag = 0xd209;
constexpr std::uint64_t kSampleTag = 0x5a39;
constexpr std::uint64_t kGrowTag = 0x6096;
constexpr std::uint64_t kInitTag = 0x1417;
constexpr std::uint64_t kSubsetTag = 0x5b5e;
constexpr std::uint64_t kSearchAugTag = 0xa06;

double stage_ratio(double s1, int stage, int stages) {
  if (stages <= 1 || s1 >= 1.0) return 1.0;
  return std::min(1.0, s1 + (1.0 - s1) * (stage - 1) / (stages - 1));
}

struct Runner {
  const RunConfig& cfg;
  const Dataset& data;
  Optimizer opt;
  MomentumState momentum;
  Rng drop_rng;
  Rng sample_rng;
  std::uint64_t global_step = 0;
  int epochs_done = 0;
  int steps_per_epoch = 0;
  int total_steps = 0;
  double cum_flops = 0.0;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  TrainOutcome outcome;
  JsonlWriter metrics_out;
  JsonlWriter report_out;

  Runner(const RunConfig& cfg_, const Dataset& data_)
      : cfg(cfg_),
        data(data_),
        opt(cfg_.optim),
        drop_rng(mix_seed(cfg_.seed, kDropPathTag)),
        sample_rng(mix_seed(cfg_.seed, kSampleTag)) {
    cfg.validate();
    const int full_side = cfg.model.input_side(cfg.model.full_spec());
    if (data.train.side != full_side) {
      throw std::invalid_argument("trainer: dataset side " + std::to_string(data.train.side) +
                                  " does not match full-model input side " +
                                  std::to_string(full_side));
    }
    if (data.train.classes != cfg.model.classes) {
      throw std::invalid_argument("trainer: dataset has " + std::to_string(data.train.classes) +
                                  " classes, model expects " + std::to_string(cfg.model.classes));
    }
    steps_per_epoch = data.train.count() / cfg.batch_size;
    if (steps_per_epoch < 1 && cfg.plan.total_epochs > 0) {
      throw std::invalid_argument("trainer: batch size exceeds the training split");
    }
    total_steps = steps_per_epoch * cfg.plan.total_epochs;
    momentum.momentum = cfg.ema_momentum;
    if (!cfg.out_dir.empty()) {
      std::filesystem::create_directories(cfg.out_dir);
      metrics_out = JsonlWriter(cfg.out_dir + "/metrics.jsonl");
      if (cfg.mode == RunMode::autoprog) {
        report_out = JsonlWriter(cfg.out_dir + "/search_report.jsonl");
      }
    }
  }

  double lr_at(std::uint64_t step) const {
    const double base = cfg.optim.lr;
    const std::uint64_t warm = static_cast<std::uint64_t>(cfg.warmup_epochs) *
                               static_cast<std::uint64_t>(steps_per_epoch);
    if (warm > 0 && step < warm) {
      return base * static_cast<double>(step + 1) / static_cast<double>(warm);
    }
    const std::uint64_t rest =
        std::max<std::uint64_t>(1, static_cast<std::uint64_t>(total_steps) - warm);
    const double progress = static_cast<double>(step - warm) / static_cast<double>(rest);
    return 0.5 * base * (1.0 + std::cos(M_PI * std::min(1.0, progress)));
  }

  std::vector<int> epoch_indices() const {
    std::vector<int> idx(static_cast<std::size_t>(data.train.count()));
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(mix_seed(mix_seed(cfg.seed, kShuffleTag), static_cast<std::uint64_t>(epochs_done)));
    rng.shuffle(idx);
    return idx;
  }

  Tensor make_batch(const std::vector<int>& idx, int step, Rng& noise_rng, float noise) const {
    std::vector<int> part(idx.begin() + static_cast<std::ptrdiff_t>(step) * cfg.batch_size,
                          idx.begin() + static_cast<std::ptrdiff_t>(step + 1) * cfg.batch_size);
    Tensor batch = data.train.gather(part);
    if (noise > 0.0f) {
      for (float& v : batch.data()) v += static_cast<float>(noise_rng.normal(0.0, noise));
    }
    return batch;
  }

  std::vector<int> batch_labels(const std::vector<int>& idx, int step) const {
    std::vector<int> part(idx.begin() + static_cast<std::ptrdiff_t>(step) * cfg.batch_size,
                          idx.begin() + static_cast<std::ptrdiff_t>(step + 1) * cfg.batch_size);
    return data.train.gather_labels(part);
  }

  void record_epoch(int stage, const SubNetSpec& spec, const char* phase, double mean_loss,
                    double epoch_flops, double eval_acc) {
    MetricRecord rec;
    rec.epoch = epochs_done;
    rec.stage = stage;
    rec.spec = spec;
    rec.phase = phase;
    rec.train_loss = mean_loss;
    rec.eval_acc = eval_acc;
    rec.step_flops = steps_per_epoch > 0 ? epoch_flops / steps_per_epoch : 0.0;
    rec.cumulative_flops = cum_flops;
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    outcome.metrics.push_back(rec);
    if (metrics_out.open()) metrics_out.append(to_json_line(rec));
    if (cfg.verbose) {
      std::printf("epoch %3d/%d stage %d %s %-9s loss %.4f acc %.4f flops %.3e\n", rec.epoch,
                  cfg.plan.total_epochs, stage, spec.str().c_str(), phase, mean_loss, eval_acc,
                  cum_flops);
      std::fflush(stdout);
    }
  }

  // One epoch of ordinary training at `spec`.
  void train_epoch_sub(ParamStore& params, const SubNetSpec& spec, const AdaRegIntensities& reg,
                       int stage) {
    const std::vector<int> idx = epoch_indices();
    Rng noise_rng(mix_seed(mix_seed(cfg.seed, kNoiseTag), static_cast<std::uint64_t>(epochs_done)));
    const double step_cost = static_cast<double>(cfg.batch_size) * train_flops(cfg.model, spec);
    double loss_sum = 0.0, epoch_flops = 0.0;
    for (int step = 0; step < steps_per_epoch; ++step) {
      Tensor x = make_batch(idx, step, noise_rng, reg.input_noise);
      const std::vector<int> labels = batch_labels(idx, step);
      if (spec.grid * cfg.model.patch != data.train.side) {
        x = resize_input(x, spec.grid, cfg.model.patch);
      }
      ForwardOptions fo{/*training=*/true, reg.drop_path, &drop_rng};
      Tensor logits = vit_forward(params, cfg.model, spec, x, fo);
      Tensor loss = ops::cross_entropy(logits, labels);
      params.zero_grads();
      backward(loss);
      opt.config().lr = static_cast<float>(lr_at(global_step));
      opt.step(params);
      momentum_update(momentum, params);
      ++global_step;
      loss_sum += loss.item();
      epoch_flops += step_cost;
      cum_flops += step_cost;
    }
    ++epochs_done;
    const double acc = evaluate(params, cfg.model, data.eval);
    record_epoch(stage, spec, "sub", steps_per_epoch ? loss_sum / steps_per_epoch : 0.0,
                 epoch_flops, acc);
  }

  // One epoch of supernet training, one sampled sub-network per step.
  void train_epoch_supernet(ElasticSupernet& sn, const AdaRegIntensities& reg, int stage) {
    const std::vector<int> idx = epoch_indices();
    Rng noise_rng(mix_seed(mix_seed(cfg.seed, kNoiseTag), static_cast<std::uint64_t>(epochs_done)));
    double loss_sum = 0.0, epoch_flops = 0.0;
    const bool singleton = sn.candidates().size() == 1;
    for (int step = 0; step < steps_per_epoch; ++step) {
      const SubNetSpec spec = singleton ? sn.candidates().front() : sn.sample_subnet(sample_rng);
      ActiveView view = sn.select(spec);
      Tensor x = make_batch(idx, step, noise_rng, reg.input_noise);
      const std::vector<int> labels = batch_labels(idx, step);
      if (spec.grid * cfg.model.patch != data.train.side) {
        x = resize_input(x, spec.grid, cfg.model.patch);
      }
      ForwardOptions fo{/*training=*/true, reg.drop_path, &drop_rng};
      Tensor logits = vit_forward(view.model_store, cfg.model, spec, x, fo);
      Tensor loss = ops::cross_entropy(logits, labels);
      sn.params().zero_grads();
      backward(loss);
      opt.config().lr = static_cast<float>(lr_at(global_step));
      opt.step(view.step_store);
      momentum_update(momentum, sn.params());
      ++global_step;
      loss_sum += loss.item();
      const double step_cost = static_cast<double>(cfg.batch_size) * train_flops(cfg.model, spec);
      epoch_flops += step_cost;
      cum_flops += step_cost;
    }
    ++epochs_done;
    ActiveView largest = sn.select(sn.largest_spec());
    const double acc = evaluate(largest.model_store, cfg.model, data.eval);
    record_epoch(stage, sn.largest_spec(), "supernet",
                 steps_per_epoch ? loss_sum / steps_per_epoch : 0.0, epoch_flops, acc);
  }

  void append_report(const std::vector<SearchReportRecord>& records) {
    for (const SearchReportRecord& rec : records) {
      outcome.search_report.push_back(rec);
      if (report_out.open()) report_out.append(to_json_line(rec));
    }
  }

  TrainOutcome finish(ParamStore params, const SubNetSpec& final_spec) {
    outcome.params = std::move(params);
    outcome.final_spec = final_spec;
    outcome.cumulative_flops = cum_flops;
    outcome.optimizer_steps = opt.step_count();
    outcome.optimizer_epochs = epochs_done;
    if (!cfg.out_dir.empty()) write_outcome(cfg, outcome);
    return std::move(outcome);
  }
};

// Applies a growth event to (params, optimizer, momentum).
ParamStore apply_growth(Runner& r, ParamStore params, const SubNetSpec& from, const SubNetSpec& to,
                        int stage) {
  GrowthResult grown = grow(r.cfg.zeta, params, r.cfg.model, from, to, &r.momentum,
                            mix_seed(mix_seed(r.cfg.seed, kGrowTag), static_cast<std::uint64_t>(stage)));
  r.opt.retain_only(grown.params.names());
  for (const std::string& name : grown.reset_names) r.opt.reset_param(name);
  rebuild_momentum(r.momentum, grown.params);
  r.outcome.growth_events += 1;
  if (r.cfg.verbose) {
    std::printf("stage %d: grew %s -> %s via %s\n", stage, from.str().c_str(), to.str().c_str(),
                to_string(r.cfg.zeta).c_str());
  }
  return std::move(grown.params);
}

TrainOutcome run_staged(const RunConfig& cfg, const Dataset& data,
                        const std::vector<SubNetSpec>& schedule, bool full_regularization) {
  Runner r(cfg, data);
  if (static_cast<int>(schedule.size()) != cfg.plan.stages) {
    throw std::invalid_argument("schedule has " + std::to_string(schedule.size()) +
                                " stages, plan expects " + std::to_string(cfg.plan.stages));
  }
  validate_schedule(schedule, cfg.model);
  const int tau = cfg.plan.stages > 0 ? cfg.plan.epochs_per_stage() : 0;
  ParamStore params = build_model(cfg.model, schedule.front(), mix_seed(cfg.seed, kInitTag));
  rebuild_momentum(r.momentum, params);
  for (int k = 1; k <= cfg.plan.stages; ++k) {
    const SubNetSpec spec = schedule[static_cast<std::size_t>(k - 1)];
    if (k > 1 && !(spec == schedule[static_cast<std::size_t>(k - 2)])) {
      params = apply_growth(r, std::move(params), schedule[static_cast<std::size_t>(k - 2)], spec, k);
    }
    const double s1 = full_regularization ? 1.0 : cfg.s1;
    const AdaRegIntensities reg =
        adareg_intensities(cfg.adareg, s1, stage_ratio(s1, k, cfg.plan.stages));
    for (int e = 0; e < tau; ++e) r.train_epoch_sub(params, spec, reg, k);
  }
  r.outcome.realized_schedule = schedule;
  return r.finish(std::move(params), schedule.back());
}

}  // namespace

TrainOutcome train_baseline(const RunConfig& cfg, const Dataset& data) {
  const std::vector<SubNetSpec> schedule(static_cast<std::size_t>(cfg.plan.stages),
                                         cfg.model.full_spec());
  return run_staged(cfg, data, schedule, /*full_regularization=*/true);
}

TrainOutcome train_prog(const RunConfig& cfg, const Dataset& data) {
  const GrowthSpace space = build_growth_space(cfg.model, cfg.s1, cfg.plan.stages);
  return run_staged(cfg, data, uniform_linear_schedule(cfg.model, space),
                    /*full_regularization=*/false);
}

TrainOutcome train_prog_with_schedule(const RunConfig& cfg, const Dataset& data,
                                      const std::vector<SubNetSpec>& schedule) {
  return run_staged(cfg, data, schedule, /*full_regularization=*/false);
}

SubNetSpec search_stage(const ElasticSupernet& supernet, const Tensor& subset_images,
                        const std::vector<int>& subset_labels, const SearchConfig& search_cfg,
                        const CostModel& cost_model, int stage,
                        std::vector<SearchReportRecord>* report, double* flops_accum) {
  const std::vector<SubNetSpec>& lambda = supernet.candidates();
  if (lambda.empty()) throw std::invalid_argument("search_stage: empty stage growth space");
  const ModelConfig& model = supernet.config();
  if (lambda.size() == 1) {
    if (report) {
      SearchReportRecord rec;
      rec.stage = stage;
      rec.spec = lambda.front();
      rec.evaluated = false;
      rec.cost = cost_model.cost(lambda.front());
      rec.chosen = true;
      report->push_back(rec);
    }
    return lambda.front();
  }
  const int count = subset_images.dim(0);
  if (count != static_cast<int>(subset_labels.size())) {
    throw std::invalid_argument("search_stage: subset images and labels disagree");
  }
  NoGradGuard ng;
  std::vector<CandidateScore> scores;
  scores.reserve(lambda.size());
  constexpr int kChunk = 250;
  for (const SubNetSpec& spec : lambda) {
    ActiveView view = supernet.select(spec);
    Tensor resized = (spec.grid * model.patch != subset_images.dim(1))
                         ? resize_input(subset_images, spec.grid, model.patch)
                         : subset_images;
    double loss_sum = 0.0;
    for (int at = 0; at < count; at += kChunk) {
      const int n = std::min(kChunk, count - at);
      Tensor chunk = Tensor::zeros({n, resized.dim(1), resized.dim(2), 3});
      const std::size_t per = static_cast<std::size_t>(resized.dim(1)) * resized.dim(2) * 3;
      std::copy_n(resized.data().data() + static_cast<std::size_t>(at) * per, per * n,
                  chunk.data().data());
      std::vector<int> labels(subset_labels.begin() + at, subset_labels.begin() + at + n);
      Tensor logits = vit_forward(view.model_store, model, spec, chunk);
      loss_sum += static_cast<double>(ops::cross_entropy(logits, labels).item()) * n;
    }
    CandidateScore cs;
    cs.spec = spec;
    cs.loss = loss_sum / count;
    cs.cost = cost_model.cost(spec);
    scores.push_back(cs);
    if (flops_accum) *flops_accum += count * forward_flops(model, spec);
  }
  double alpha = 0.0;
  const std::size_t best = pick_candidate(scores, search_cfg, &alpha);
  if (report) {
    for (const CandidateScore& cs : scores) {
      SearchReportRecord rec;
      rec.stage = stage;
      rec.spec = cs.spec;
      rec.evaluated = true;
      rec.loss = cs.loss;
      rec.cost = cs.cost;
      rec.alpha = alpha;
      rec.score = cs.score;
      rec.chosen = cs.chosen;
      report->push_back(rec);
    }
  }
  return scores[best].spec;
}

TrainOutcome train_autoprog(const RunConfig& cfg, const Dataset& data) {
  Runner r(cfg, data);
  const int stages = cfg.plan.stages;
  const int tau = cfg.plan.epochs_per_stage();
  const GrowthSpace space = build_growth_space(cfg.model, cfg.s1, stages);
  const CostModel cost_model(cfg.model);

  // Fixed evaluation subset for the traversal search.
  std::vector<int> all(static_cast<std::size_t>(data.train.count()));
  std::iota(all.begin(), all.end(), 0);
  Rng subset_rng(mix_seed(cfg.search.eval_seed, kSubsetTag));
  subset_rng.shuffle(all);
  const int subset_n = std::min(cfg.search.eval_subset, data.train.count());
  const std::vector<int> subset_idx(all.begin(), all.begin() + subset_n);
  const Tensor subset_base = data.train.gather(subset_idx);
  const std::vector<int> subset_labels = data.train.gather_labels(subset_idx);

  SubNetSpec prev{scaled_dim(cfg.s1, cfg.model.max_depth), scaled_dim(cfg.s1, cfg.model.max_grid)};
  ParamStore params = build_model(cfg.model, prev, mix_seed(cfg.seed, kInitTag));
  rebuild_momentum(r.momentum, params);

  for (int k = 1; k <= stages; ++k) {
    std::vector<SubNetSpec> lambda =
        (k == stages) ? std::vector<SubNetSpec>{cfg.model.full_spec()}
                      : build_stage_space(space, k, prev, cfg.model);
    const AdaRegIntensities reg =
        adareg_intensities(cfg.adareg, cfg.s1, stage_ratio(cfg.s1, k, stages));
    const SubNetSpec largest = max_spec(lambda);

    if (largest == prev) {
      // No growth possible this stage; the whole stage is ordinary training.
      std::vector<SearchReportRecord> rec(1);
      rec[0].stage = k;
      rec[0].spec = prev;
      rec[0].evaluated = false;
      rec[0].cost = cost_model.cost(prev);
      rec[0].chosen = true;
      r.append_report(rec);
      for (int e = 0; e < tau; ++e) r.train_epoch_sub(params, prev, reg, k);
      r.outcome.realized_schedule.push_back(prev);
      continue;
    }

    ElasticSupernet supernet(params, prev, lambda, cfg.zeta, &r.momentum, cfg.model,
                             mix_seed(mix_seed(cfg.seed, kGrowTag), static_cast<std::uint64_t>(k)));
    r.opt.retain_only(supernet.params().names());
    for (const std::string& name : supernet.reset_names()) r.opt.reset_param(name);
    rebuild_momentum(r.momentum, supernet.params());
    r.outcome.growth_events += 1;
    if (cfg.verbose) {
      std::printf("stage %d: supernet %s over %zu candidates via %s\n", k,
                  supernet.largest_spec().str().c_str(), supernet.candidates().size(),
                  to_string(cfg.zeta).c_str());
    }

    const int sup_epochs = std::min(cfg.plan.supernet_epochs, tau);
    for (int e = 0; e < sup_epochs; ++e) r.train_epoch_supernet(supernet, reg, k);

    // Fixed augmentation for this stage's search.
    Tensor subset = subset_base.clone();
    if (reg.input_noise > 0.0f) {
      Rng aug_rng(mix_seed(mix_seed(cfg.search.eval_seed, kSearchAugTag),
                           static_cast<std::uint64_t>(k)));
      for (float& v : subset.data()) {
        v += static_cast<float>(aug_rng.normal(0.0, reg.input_noise));
      }
    }
    std::vector<SearchReportRecord> report;
    const SubNetSpec chosen = search_stage(supernet, subset, subset_labels, cfg.search, cost_model,
                                           k, &report, &r.cum_flops);
    r.append_report(report);
    if (cfg.verbose) {
      std::printf("stage %d: searched %zu candidates, chose %s\n", k,
                  supernet.candidates().size(), chosen.str().c_str());
    }

    // Weight recycling: the chosen sub-network inherits its supernet weights.
    ActiveView chosen_view = supernet.select(chosen);
    params = supernet.export_subnet(chosen);
    r.opt.retain_only(params.names());
    for (std::size_t i = 0; i < chosen_view.active_layers.size(); ++i) {
      if (chosen_view.active_layers[i] == static_cast<int>(i)) continue;
      for (const auto& def : block_param_shapes(cfg.model, static_cast<int>(i))) {
        r.opt.reset_param(def.name);
      }
      const std::string scale = block_prefix(static_cast<int>(i)) + "/res_scale";
      if (params.has(scale)) r.opt.reset_param(scale);
    }
    if (!(chosen.grid == supernet.largest_spec().grid)) r.opt.reset_param("pos_embed");
    rebuild_momentum(r.momentum, params);

    for (int e = 0; e < tau - sup_epochs; ++e) r.train_epoch_sub(params, chosen, reg, k);
    r.outcome.realized_schedule.push_back(chosen);
    prev = chosen;
  }

  validate_schedule(r.outcome.realized_schedule, cfg.model);
  return r.finish(std::move(params), prev);
}

double evaluate(const ParamStore& params, const ModelConfig& cfg, const Split& split, int grid,
                int eval_batch) {
  if (split.count() == 0) throw std::invalid_argument("evaluate: empty split");
  NoGradGuard ng;
  const SubNetSpec spec{store_depth(params), grid > 0 ? grid : pe_grid_of(params.at("pos_embed"))};
  int correct = 0;
  std::vector<int> idx;
  for (int at = 0; at < split.count(); at += eval_batch) {
    const int n = std::min(eval_batch, split.count() - at);
    idx.resize(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), at);
    Tensor batch = split.gather(idx);
    if (spec.grid * cfg.patch != split.side) {
      batch = resize_input(batch, spec.grid, cfg.patch);
    }
    Tensor logits = vit_forward(params, cfg, spec, batch);
    const std::vector<int> labels = split.gather_labels(idx);
    for (int b = 0; b < n; ++b) {
      const float* row = logits.data().data() + static_cast<std::size_t>(b) * cfg.classes;
      int arg = 0;
      for (int c = 1; c < cfg.classes; ++c) {
        if (row[c] > row[arg]) arg = c;
      }
      if (arg == labels[static_cast<std::size_t>(b)]) ++correct;
    }
  }
  return static_cast<double>(correct) / split.count();
}

void write_outcome(const RunConfig& cfg, const TrainOutcome& outcome) {
  if (cfg.out_dir.empty()) throw std::invalid_argument("write_outcome: no output directory");
  std::filesystem::create_directories(cfg.out_dir);
  Checkpoint ckpt;
  ckpt.config_text = serialize_config(cfg);
  ckpt.optimizer_step = outcome.optimizer_steps;
  ckpt.params = outcome.params.clone();
  save_checkpoint(cfg.out_dir + "/checkpoint.bin", ckpt);
  if (!outcome.realized_schedule.empty()) {
    save_schedule(cfg.out_dir + "/schedule.txt", outcome.realized_schedule);
  }
}

}  // namespace autoprog
