// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one criterion per command-line argument (1..10), all when
// none are given. Prints one PASS/FAIL line per criterion; the exit code is
// the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "autoprog/trainer.hpp"
#include "reference_vit.hpp"

using namespace autoprog;
namespace fs = std::filesystem;

namespace {

struct CheckFailure {
  std::string message;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw CheckFailure{message};
}

void scramble(ParamStore& store, Rng& rng, float scale) {
  for (auto& [name, t] : store) {
    for (float& v : t.data()) v = static_cast<float>(rng.normal(0.0, scale));
  }
}

ModelConfig desk_model() {
  ModelConfig cfg;
  cfg.max_depth = 8;
  cfg.max_grid = 8;
  cfg.patch = 4;
  cfg.embed_dim = 64;
  cfg.heads = 4;
  cfg.mlp_ratio = 4.0f;
  cfg.classes = 10;
  return cfg;
}

ModelConfig deit_s_model() {
  ModelConfig cfg;
  cfg.max_depth = 12;
  cfg.max_grid = 14;
  cfg.patch = 16;
  cfg.embed_dim = 384;
  cfg.heads = 6;
  cfg.mlp_ratio = 4.0f;
  cfg.classes = 1000;
  return cfg;
}

// ---------------------------------------------------------------------------
// 1. depth_map totality/monotonicity plus the doubling-case mappings.
std::string criterion_1() {
  const std::vector<GrowthOperatorKind> kinds{
      GrowthOperatorKind::rand_init, GrowthOperatorKind::stacking,
      GrowthOperatorKind::interpolation, GrowthOperatorKind::identity,
      GrowthOperatorKind::mogrow};
  for (GrowthOperatorKind kind : kinds) {
    for (int ls = 1; ls <= 12; ++ls) {
      for (int ll = ls; ll <= 12; ++ll) {
        std::set<int> used;
        int prev = -1;
        for (int i = 0; i < ll; ++i) {
          const DepthSource s = depth_map(kind, i, ls, ll);
          require(s.fresh || (s.index >= 0 && s.index < ls),
                  "depth_map out of range for " + to_string(kind));
          if (kind != GrowthOperatorKind::rand_init && kind != GrowthOperatorKind::stacking) {
            require(!s.fresh, "interpolation family must not request fresh layers");
            require(s.index >= prev, "interpolation mapping must be non-decreasing");
            prev = s.index;
            used.insert(s.index);
          }
        }
        if (kind != GrowthOperatorKind::rand_init && kind != GrowthOperatorKind::stacking) {
          require(static_cast<int>(used.size()) == ls,
                  "interpolation mapping must use every source layer");
        }
      }
    }
  }
  auto indices = [](GrowthOperatorKind kind, int ls, int ll) {
    std::vector<int> out;
    for (int i = 0; i < ll; ++i) out.push_back(depth_map(kind, i, ls, ll).index);
    return out;
  };
  require(indices(GrowthOperatorKind::stacking, 2, 4) == std::vector<int>{0, 1, 0, 1},
          "stacking doubling case must map [A,B] -> [A,B,A,B]");
  require(indices(GrowthOperatorKind::interpolation, 2, 4) == std::vector<int>{0, 0, 1, 1},
          "interpolation doubling case must map [A,B] -> [A,A,B,B]");
  return "all kinds, 1 <= l_s <= l_l <= 12";
}

// ---------------------------------------------------------------------------
// 2. Identity growth preserves the full-model function (d=64, depth 4 -> 8).
std::string criterion_2() {
  ModelConfig cfg = desk_model();
  ParamStore small = build_model(cfg, {4, 8}, 11);
  Rng rng(12);
  scramble(small, rng, 0.2f);
  GrowthResult grown = grow(GrowthOperatorKind::identity, small, cfg, {4, 8}, {8, 8}, nullptr, 13);
  float worst = 0.0f;
  for (int trial = 0; trial < 16; ++trial) {
    Tensor batch = Tensor::zeros({4, 32, 32, 3});
    for (float& v : batch.data()) v = static_cast<float>(rng.normal(0.0, 1.0));
    Tensor before = vit_forward(small, cfg, {4, 8}, batch);
    Tensor after = vit_forward(grown.params, cfg, {8, 8}, batch);
    for (std::size_t i = 0; i < before.numel(); ++i) {
      worst = std::max(worst, std::abs(before.data()[i] - after.data()[i]));
    }
  }
  require(worst < 1e-5f, "identity growth changed the logits by " + std::to_string(worst));
  std::ostringstream os;
  os << "max |delta logits| = " << worst << " over 16 batches";
  return os.str();
}

// ---------------------------------------------------------------------------
// 3. MoGrow equals interpolation growth of the momentum copy exactly.
std::string criterion_3() {
  ModelConfig cfg = desk_model();
  ParamStore online = build_model(cfg, {4, 4}, 21);
  Rng rng(22);
  scramble(online, rng, 0.3f);
  MomentumState state;
  rebuild_momentum(state, online);
  for (auto& [name, t] : state.ema) {
    for (float& v : t.data()) v = static_cast<float>(rng.normal(0.0, 0.3));
  }
  GrowthResult mogrow =
      grow(GrowthOperatorKind::mogrow, online, cfg, {4, 4}, {8, 8}, &state, 23);
  GrowthResult interp =
      grow(GrowthOperatorKind::interpolation, state.ema, cfg, {4, 4}, {8, 8}, nullptr, 23);
  require(ParamStore::equal(mogrow.params, interp.params),
          "MoGrow result differs from interpolation growth of the momentum copy");
  return "tensor-for-tensor equality on a (4,4) -> (8,8) growth";
}

// ---------------------------------------------------------------------------
// 4. Weight nesting (Definition 1) plus export/forward equivalence for every
//    stage growth space induced by the 4-rung ladder.
std::string criterion_4() {
  ModelConfig cfg = desk_model();
  cfg.embed_dim = 32;
  cfg.mlp_ratio = 2.0f;
  const GrowthSpace space = build_growth_space(cfg, 0.5, 4);
  SubNetSpec prev{space.depths.front(), space.grids.front()};
  ParamStore w = build_model(cfg, prev, 31);
  Rng rng(32);
  scramble(w, rng, 0.2f);
  MomentumState momentum;
  rebuild_momentum(momentum, w);
  int pairs = 0, exports = 0;
  for (int k = 1; k <= 4; ++k) {
    const std::vector<SubNetSpec> lambda = build_stage_space(space, k, prev, cfg);
    ElasticSupernet sn(w, prev, lambda, GrowthOperatorKind::mogrow, &momentum, cfg,
                       40 + static_cast<std::uint64_t>(k));
    for (const SubNetSpec& a : sn.candidates()) {
      for (const SubNetSpec& b : sn.candidates()) {
        if (param_count(cfg, a) > param_count(cfg, b)) continue;
        const auto na = sn.view_param_names(a);
        const auto nb = sn.view_param_names(b);
        const std::set<std::string> sb(nb.begin(), nb.end());
        for (const std::string& name : na) {
          require(sb.count(name) == 1, "weight nesting violated between " + a.str() + " and " +
                                           b.str() + " at tensor " + name);
        }
        ++pairs;
      }
    }
    for (const SubNetSpec& spec : sn.candidates()) {
      ActiveView view = sn.select(spec);
      ParamStore exported = sn.export_subnet(spec);
      for (int trial = 0; trial < 2; ++trial) {
        Tensor batch = Tensor::zeros({2, cfg.input_side(spec), cfg.input_side(spec), 3});
        for (float& v : batch.data()) v = static_cast<float>(rng.normal(0.0, 1.0));
        Tensor lhs = vit_forward(view.model_store, cfg, spec, batch);
        Tensor rhs = vit_forward(exported, cfg, spec, batch);
        for (std::size_t i = 0; i < lhs.numel(); ++i) {
          require(std::abs(lhs.data()[i] - rhs.data()[i]) < 1e-6f,
                  "export/forward mismatch for " + spec.str());
        }
      }
      ++exports;
    }
    prev = max_spec(lambda);
    w = sn.export_subnet(prev);
    rebuild_momentum(momentum, w);
  }
  std::ostringstream os;
  os << pairs << " nesting pairs, " << exports << " export equivalences over 4 stage spaces";
  return os.str();
}

// ---------------------------------------------------------------------------
// 5. search_stage scoring equals an independent brute-force scorer on 100
//    random fixtures including the degenerate ties.
std::string criterion_5() {
  Rng rng(77);
  auto oracle_pick = [](const std::vector<std::pair<double, double>>& lc) {
    double lmin = lc[0].first, lmax = lc[0].first, tmin = lc[0].second, tmax = lc[0].second;
    for (const auto& [l, t] : lc) {
      lmin = std::min(lmin, l);
      lmax = std::max(lmax, l);
      tmin = std::min(tmin, t);
      tmax = std::max(tmax, t);
    }
    const double alpha =
        (lmax == lmin || tmax == tmin) ? 0.0 : std::log(lmax / lmin) / std::log(tmax / tmin);
    std::size_t best = 0;
    double best_score = lc[0].first * std::pow(lc[0].second, alpha);
    for (std::size_t i = 1; i < lc.size(); ++i) {
      const double score = lc[i].first * std::pow(lc[i].second, alpha);
      if (score < best_score || (score == best_score && lc[i].second < lc[best].second)) {
        best = i;
        best_score = score;
      }
    }
    return best;
  };
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.uniform_below(8);
    const bool equal_losses = trial % 10 == 3;
    const bool equal_costs = trial % 10 == 7;
    const double shared_loss = 0.5 + rng.uniform01();
    const double shared_cost = 1.0 + rng.uniform01() * 4.0;
    std::vector<std::pair<double, double>> lc;
    std::vector<CandidateScore> scores;
    for (std::size_t i = 0; i < n; ++i) {
      lc.emplace_back(equal_losses ? shared_loss : 0.3 + rng.uniform01() * 2.0,
                      equal_costs ? shared_cost : 0.5 + rng.uniform01() * 8.0);
      CandidateScore cs;
      cs.spec = {static_cast<int>(i) + 1, 1};
      cs.loss = lc.back().first;
      cs.cost = lc.back().second;
      scores.push_back(cs);
    }
    SearchConfig scfg;
    const std::size_t got = pick_candidate(scores, scfg);
    const std::size_t want = oracle_pick(lc);
    require(got == want, "fixture " + std::to_string(trial) + ": picked candidate " +
                             std::to_string(got) + ", oracle says " + std::to_string(want));
  }
  return "100 fixtures of size <= 9, ties included";
}

// ---------------------------------------------------------------------------
// 6. Cost-model calibration: DeiT-S-shaped forward flops near 4.6G; uniform
//    linear half schedule averages under 0.55 of full cost.
std::string criterion_6() {
  const ModelConfig deit = deit_s_model();
  const double flops = forward_flops(deit, deit.full_spec());
  require(std::abs(flops - 4.6e9) < 0.1 * 4.6e9,
          "DeiT-S forward flops " + std::to_string(flops) + " off by more than 10%");
  const auto schedule = uniform_linear_schedule(deit, build_growth_space(deit, 0.5, 4));
  double total = 0.0;
  for (const SubNetSpec& spec : schedule) total += train_flops(deit, spec);
  const double ratio = total / (schedule.size() * train_flops(deit, deit.full_spec()));
  require(ratio < 0.55, "average-cost ratio " + std::to_string(ratio) + " not under 0.55");
  std::ostringstream os;
  os << "forward " << flops / 1e9 << "G (target 4.6G +-10%), schedule cost ratio " << ratio;
  return os.str();
}

// ---------------------------------------------------------------------------
// 7. Finite-difference gradient check on >= 100 sampled parameters.
std::string criterion_7() {
  ModelConfig cfg;
  cfg.max_depth = 3;
  cfg.max_grid = 3;
  cfg.patch = 4;
  cfg.embed_dim = 32;
  cfg.heads = 4;
  cfg.mlp_ratio = 2.0f;
  cfg.classes = 7;
  const SubNetSpec spec = cfg.full_spec();
  ParamStore store = build_model(cfg, spec, 19);
  Rng rng(20);
  Tensor batch = Tensor::zeros({3, 12, 12, 3});
  for (float& v : batch.data()) v = static_cast<float>(rng.normal(0.0, 1.0));
  const std::vector<int> labels{2, 5, 1};

  store.zero_grads();
  Tensor logits = vit_forward(store, cfg, spec, batch);
  Tensor loss = ops::cross_entropy(logits, labels);
  backward(loss);

  bool ok = false;
  const refvit::FdSummary summary =
      refvit::fd_check_params(store, cfg, spec, batch, labels, 120, 21, 1e-3, &ok);
  std::ostringstream os;
  os << summary.checked << " parameters, max rel " << summary.max_rel << ", mean rel "
     << summary.mean_rel;
  require(ok, "gradient mismatch: " + os.str());
  return os.str();
}

// ---------------------------------------------------------------------------
// 8. Desk-scale speedup: AutoProg within 2 points of the baseline at <= 70%
//    of its training flops, for each of 3 seeds.
RunConfig desk_run_config(RunMode mode, std::uint64_t seed) {
  RunConfig cfg;
  cfg.mode = mode;
  cfg.seed = seed;
  cfg.dataset = "synthetic(10, 5000, 32, 2026)";
  cfg.batch_size = 100;
  cfg.model = desk_model();
  cfg.plan = {32, 4, 2};
  cfg.s1 = 0.5;
  cfg.zeta = GrowthOperatorKind::mogrow;
  cfg.zeta_given = true;
  cfg.search.eval_subset = 250;
  cfg.search.eval_seed = 41;
  cfg.optim.lr = 1e-3f;
  cfg.optim.weight_decay = 0.05f;
  cfg.warmup_epochs = 3;
  cfg.ema_momentum = 0.998f;
  cfg.adareg.drop_path = {0.0f, 0.1f};
  cfg.adareg.input_noise = {0.0f, 0.1f};
  return cfg;
}

std::string criterion_8() {
  const Dataset data = ingest_dataset("synthetic(10, 5000, 32, 2026)");
  std::ostringstream os;
  bool all_ok = true;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const TrainOutcome base = train_baseline(desk_run_config(RunMode::baseline, seed), data);
    const TrainOutcome autop = train_autoprog(desk_run_config(RunMode::autoprog, seed), data);
    const double acc_base = base.metrics.back().eval_acc;
    const double acc_auto = autop.metrics.back().eval_acc;
    const double gap = std::abs(acc_base - acc_auto);
    const double ratio = autop.cumulative_flops / base.cumulative_flops;
    std::printf("    seed %llu: baseline %.4f, autoprog %.4f, gap %.2f pts, flops ratio %.3f,"
                " schedule",
                static_cast<unsigned long long>(seed), acc_base, acc_auto, gap * 100.0, ratio);
    for (const SubNetSpec& s : autop.realized_schedule) {
      std::printf(" (%d,%d)", s.depth, s.grid);
    }
    std::printf("\n");
    std::fflush(stdout);
    os << "seed " << seed << ": gap " << gap * 100.0 << " pts, ratio " << ratio << "; ";
    if (gap > 0.02 || ratio > 0.70) all_ok = false;
  }
  require(all_ok, "a seed exceeded the 2.0-point gap or the 70% flops budget: " + os.str());
  return os.str();
}

// ---------------------------------------------------------------------------
// 9. AutoProg consumes exactly |t| optimizer epochs; the realized schedule is
//    non-decreasing and ends on the full model (verified from the files).
std::string criterion_9() {
  RunConfig cfg;
  cfg.mode = RunMode::autoprog;
  cfg.seed = 5;
  cfg.dataset = "synthetic(10, 1200, 32, 17)";
  cfg.batch_size = 100;
  cfg.model = desk_model();
  cfg.model.embed_dim = 32;
  cfg.model.mlp_ratio = 2.0f;
  cfg.plan = {16, 4, 2};
  cfg.s1 = 0.5;
  cfg.search.eval_subset = 120;
  cfg.search.eval_seed = 6;
  cfg.warmup_epochs = 2;
  const fs::path out_dir = fs::temp_directory_path() / "autoprog_acceptance_9";
  fs::remove_all(out_dir);
  cfg.out_dir = out_dir.string();

  const Dataset data = ingest_dataset(cfg.dataset);
  const TrainOutcome out = train_autoprog(cfg, data);

  const auto metrics = load_metrics((out_dir / "metrics.jsonl").string());
  require(static_cast<int>(metrics.size()) == cfg.plan.total_epochs,
          "metric stream holds " + std::to_string(metrics.size()) + " records, expected " +
              std::to_string(cfg.plan.total_epochs));
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    require(metrics[i].epoch == static_cast<int>(i) + 1, "epoch numbering is not contiguous");
  }
  require(out.optimizer_epochs == cfg.plan.total_epochs, "optimizer epochs diverge from |t|");
  require(out.optimizer_steps == static_cast<std::uint64_t>(cfg.plan.total_epochs) * 12,
          "optimizer steps diverge from |t| * steps-per-epoch");

  const auto schedule = load_schedule((out_dir / "schedule.txt").string());
  require(static_cast<int>(schedule.size()) == cfg.plan.stages, "schedule length mismatch");
  for (std::size_t k = 1; k < schedule.size(); ++k) {
    require(schedule[k].dominates(schedule[k - 1]), "realized schedule decreased");
  }
  require(schedule.back() == cfg.model.full_spec(),
          "realized schedule does not end on the full model");
  fs::remove_all(out_dir);
  std::ostringstream os;
  os << cfg.plan.total_epochs << " epochs exactly, schedule";
  for (const SubNetSpec& s : schedule) os << " (" << s.depth << "," << s.grid << ")";
  return os.str();
}

// ---------------------------------------------------------------------------
// 10. EMA fixed point and one-step drift bound for m in {0, 0.9, 0.998, 1}.
std::string criterion_10() {
  ModelConfig cfg = desk_model();
  cfg.embed_dim = 32;
  cfg.max_depth = 4;
  ParamStore params = build_model(cfg, {4, 8}, 51);
  Rng rng(52);
  scramble(params, rng, 1.0f);
  for (float m : {0.0f, 0.9f, 0.998f, 1.0f}) {
    MomentumState state;
    state.momentum = m;
    rebuild_momentum(state, params);
    momentum_update(state, params);
    require(ParamStore::equal(state.ema, params),
            "EMA fixed point violated at m = " + std::to_string(m));

    ParamStore before = params.clone();
    for (auto& [name, t] : params) {
      for (float& v : t.data()) v += 0.01f;
    }
    momentum_update(state, params);
    for (const auto& [name, t] : state.ema) {
      double drift = 0.0, delta = 0.0, norm = 0.0;
      const auto& b = before.at(name).data();
      const auto& w = params.at(name).data();
      for (std::size_t i = 0; i < t.numel(); ++i) {
        drift += (t.data()[i] - b[i]) * (t.data()[i] - b[i]);
        delta += (w[i] - b[i]) * (w[i] - b[i]);
        norm += static_cast<double>(b[i]) * b[i];
      }
      const double slack = 4e-7 * std::sqrt(norm) + 1e-12;
      require(std::sqrt(drift) <= (1.0 - m) * std::sqrt(delta) + slack,
              "one-step EMA drift bound violated at m = " + std::to_string(m) + " for " + name);
    }
    params = before;
  }
  return "fixed point and one-step bound for m in {0, 0.9, 0.998, 1}";
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* title;
    std::function<std::string()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "growth-operator depth-map suite", criterion_1},
      {2, "identity growth preserves the network function", criterion_2},
      {3, "MoGrow equals interpolation of the momentum copy", criterion_3},
      {4, "weight nesting and export equivalence", criterion_4},
      {5, "search matches the brute-force scorer", criterion_5},
      {6, "cost-model calibration", criterion_6},
      {7, "finite-difference gradient correctness", criterion_7},
      {8, "desk-scale training speedup", criterion_8},
      {9, "schedule accounting", criterion_9},
      {10, "EMA fixed point and drift bound", criterion_10},
  };

  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = true;
    try {
      detail = c.run();
    } catch (const CheckFailure& f) {
      ok = false;
      detail = f.message;
    } catch (const std::exception& e) {
      ok = false;
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] criterion %2d: %s (%.1fs) %s\n", ok ? "PASS" : "FAIL", c.id, c.title, secs,
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  return failures;
}
