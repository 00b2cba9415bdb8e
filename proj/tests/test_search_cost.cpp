// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "autoprog/cost.hpp"
#include "autoprog/rng.hpp"
#include "autoprog/schedule.hpp"
#include "autoprog/search.hpp"

using namespace autoprog;

namespace {

ModelConfig deit_s() {
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

// Straight-line re-scoring used as the search oracle: recompute alpha from
// the ranges, score every candidate, scan for the minimum with the
// smaller-cost tie-break.
std::size_t oracle_pick(const std::vector<std::pair<double, double>>& lc) {
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
    if (score < best_score ||
        (score == best_score && lc[i].second < lc[best].second)) {
      best = i;
      best_score = score;
    }
  }
  return best;
}

std::size_t run_pick(const std::vector<std::pair<double, double>>& lc, double* alpha = nullptr) {
  std::vector<CandidateScore> scores;
  for (std::size_t i = 0; i < lc.size(); ++i) {
    CandidateScore cs;
    cs.spec = {static_cast<int>(i) + 1, 1};
    cs.loss = lc[i].first;
    cs.cost = lc[i].second;
    scores.push_back(cs);
  }
  SearchConfig cfg;
  return pick_candidate(scores, cfg, alpha);
}

}  // namespace

TEST_CASE("forward flops of a DeiT-S-shaped model land on the published scale") {
  const double flops = forward_flops(deit_s(), {12, 14});
  CHECK(flops > 4.6e9 * 0.9);
  CHECK(flops < 4.6e9 * 1.1);
}

TEST_CASE("block costs are linear in depth once the stem and head are removed") {
  const ModelConfig cfg = deit_s();
  const double per_block = forward_flops(cfg, {12, 14}) - forward_flops(cfg, {11, 14});
  const double stem_head = forward_flops(cfg, {12, 14}) - 12.0 * per_block;
  const double full_blocks = forward_flops(cfg, {12, 14}) - stem_head;
  const double half_blocks = forward_flops(cfg, {6, 14}) - stem_head;
  CHECK(half_blocks == Catch::Approx(full_blocks / 2).epsilon(1e-9));
}

TEST_CASE("cost is monotone in both spec dimensions") {
  const ModelConfig cfg = deit_s();
  for (int d = 1; d <= 12; d += 3) {
    for (int g = 1; g <= 14; g += 4) {
      if (d + 1 <= 12) CHECK(forward_flops(cfg, {d, g}) <= forward_flops(cfg, {d + 1, g}));
      if (g + 1 <= 14) CHECK(forward_flops(cfg, {d, g}) <= forward_flops(cfg, {d, g + 1}));
    }
  }
  CHECK(train_flops(cfg, {12, 14}) == Catch::Approx(3.0 * forward_flops(cfg, {12, 14})));
}

TEST_CASE("the uniform linear half schedule averages under 55 percent of full cost") {
  const ModelConfig cfg = deit_s();
  const auto schedule = uniform_linear_schedule(cfg, build_growth_space(cfg, 0.5, 4));
  double total = 0.0;
  for (const SubNetSpec& spec : schedule) total += train_flops(cfg, spec);
  const double ratio = total / (schedule.size() * train_flops(cfg, cfg.full_spec()));
  CHECK(ratio < 0.55);
  CHECK(ratio > 0.2);
}

TEST_CASE("wall-time calibration scales the analytic cost") {
  CostModel model(deit_s());
  const SubNetSpec spec{6, 7};
  const double analytic = model.cost(spec);
  model.calibrate({spec}, [](const SubNetSpec&) { return 2.5; });
  CHECK(model.cost(spec) == Catch::Approx(2.5));
  CHECK(model.cost({12, 14}) == Catch::Approx(train_flops(deit_s(), {12, 14})));
  model.clear_calibration();
  CHECK(model.cost(spec) == Catch::Approx(analytic));
}

TEST_CASE("alpha matches the range-balancing rule") {
  CHECK(compute_alpha({{1.0, 1.0}, {2.0, 4.0}}) == Catch::Approx(0.5));
  CHECK(compute_alpha({{1.0, 1.0}, {1.0, 4.0}}) == 0.0);
  CHECK(compute_alpha({{1.0, 2.0}, {3.0, 2.0}}) == 0.0);
  CHECK_THROWS_WITH(compute_alpha({{1.0, 1.0}}), Catch::Matchers::ContainsSubstring("two"));
  CHECK_THROWS_WITH(compute_alpha({{0.0, 1.0}, {1.0, 2.0}}),
                    Catch::Matchers::ContainsSubstring("positive"));
  CHECK_THROWS_WITH(compute_alpha({{1.0, -1.0}, {1.0, 2.0}}),
                    Catch::Matchers::ContainsSubstring("positive"));
}

TEST_CASE("synthetic fixture matches the exhaustive scorer") {
  double alpha = 0.0;
  const std::size_t best = run_pick({{1.0, 1.0}, {0.9, 2.0}, {0.85, 4.0}}, &alpha);
  CHECK(best == oracle_pick({{1.0, 1.0}, {0.9, 2.0}, {0.85, 4.0}}));
  CHECK(alpha == Catch::Approx(std::log(1.0 / 0.85) / std::log(4.0)));
}

TEST_CASE("equal losses fall back to the cheapest candidate") {
  CHECK(run_pick({{1.0, 4.0}, {1.0, 1.0}, {1.0, 2.0}}) == 1);
  // equal costs rank purely by loss
  CHECK(run_pick({{1.2, 3.0}, {0.7, 3.0}, {1.0, 3.0}}) == 1);
}

TEST_CASE("argmin is invariant to rescaling all losses or all costs") {
  Rng rng(2024);
  int tested = 0;
  while (tested < 50) {
    const std::size_t n = 2 + rng.uniform_below(8);
    std::vector<std::pair<double, double>> lc;
    for (std::size_t i = 0; i < n; ++i) {
      lc.emplace_back(0.5 + rng.uniform01() * 2.0, 1.0 + rng.uniform01() * 9.0);
    }
    std::vector<CandidateScore> scored;
    for (const auto& [l, t] : lc) {
      CandidateScore cs;
      cs.loss = l;
      cs.cost = t;
      scored.push_back(cs);
    }
    SearchConfig scfg;
    const std::size_t base = pick_candidate(scored, scfg);
    // skip fp near-ties: the invariant is exact in real arithmetic but a
    // common rescale perturbs the last ulp of tied scores
    double runner_up = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < scored.size(); ++i) {
      if (i != base) runner_up = std::min(runner_up, scored[i].score);
    }
    if (runner_up - scored[base].score < 1e-6 * scored[base].score) continue;
    ++tested;
    std::vector<std::pair<double, double>> loss_scaled = lc, cost_scaled = lc;
    const double c = 0.1 + rng.uniform01() * 10.0;
    for (auto& [l, t] : loss_scaled) l *= c;
    for (auto& [l, t] : cost_scaled) t *= c;
    CHECK(run_pick(loss_scaled) == base);
    CHECK(run_pick(cost_scaled) == base);
  }
}

TEST_CASE("one hundred random fixtures agree with the oracle") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.uniform_below(8);
    std::vector<std::pair<double, double>> lc;
    const bool equal_losses = trial % 10 == 3;
    const bool equal_costs = trial % 10 == 7;
    const double shared_loss = 0.5 + rng.uniform01();
    const double shared_cost = 1.0 + rng.uniform01() * 4.0;
    for (std::size_t i = 0; i < n; ++i) {
      lc.emplace_back(equal_losses ? shared_loss : 0.3 + rng.uniform01() * 2.0,
                      equal_costs ? shared_cost : 0.5 + rng.uniform01() * 8.0);
    }
    INFO("trial " << trial << " with " << n << " candidates");
    CHECK(run_pick(lc) == oracle_pick(lc));
  }
}

TEST_CASE("fixed alpha policy bypasses the balancing rule") {
  std::vector<CandidateScore> scores;
  for (double cost : {1.0, 8.0}) {
    CandidateScore cs;
    cs.spec = {1, 1};
    cs.loss = cost == 1.0 ? 1.0 : 0.9;
    cs.cost = cost;
    scores.push_back(cs);
  }
  SearchConfig cfg;
  cfg.alpha_balanced = false;
  cfg.alpha_fixed = 1.0;
  double alpha = -1.0;
  const std::size_t best = pick_candidate(scores, cfg, &alpha);
  CHECK(alpha == 1.0);
  CHECK(best == 0);  // 1.0*1 < 0.9*8
}
