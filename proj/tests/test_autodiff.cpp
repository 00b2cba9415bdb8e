// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "autoprog/optimizer.hpp"
#include "autoprog/ops.hpp"
#include "test_util.hpp"

using namespace autoprog;
namespace op = autoprog::ops;

namespace {

ParamStore single_param(const std::string& name, std::vector<float> values) {
  const int n = static_cast<int>(values.size());
  ParamStore store;
  store.add(name, Tensor::from_data({n}, std::move(values), true));
  return store;
}

}  // namespace

TEST_CASE("one step on w^2 moves downhill") {
  OptimConfig cfg;
  cfg.lr = 0.1f;
  cfg.weight_decay = 0.0f;
  Optimizer opt(cfg);
  ParamStore store = single_param("w", {1.0f});
  Tensor loss = op::sum(op::mul(store.at("w"), store.at("w")));
  backward(loss);
  opt.step(store);
  CHECK(store.at("w").data()[0] < 1.0f);
  CHECK(opt.step_count() == 1);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  OptimConfig cfg;
  cfg.lr = 0.0f;
  cfg.weight_decay = 0.3f;
  Optimizer opt(cfg);
  ParamStore store = single_param("w", {1.0f, -2.5f});
  Tensor loss = op::sum(op::mul(store.at("w"), store.at("w")));
  backward(loss);
  opt.step(store);
  CHECK(store.at("w").data() == std::vector<float>{1.0f, -2.5f});
}

TEST_CASE("200 steps on a 2-d quadratic reach the origin") {
  OptimConfig cfg;
  cfg.lr = 0.05f;
  cfg.weight_decay = 0.0f;
  Optimizer opt(cfg);
  ParamStore store = single_param("w", {1.0f, -0.7f});
  float final_loss = 0.0f;
  for (int i = 0; i < 200; ++i) {
    store.zero_grads();
    Tensor loss = op::sum(op::mul(store.at("w"), store.at("w")));
    backward(loss);
    opt.step(store);
    final_loss = op::sum(op::mul(store.at("w"), store.at("w"))).item();
  }
  CHECK(final_loss < 1e-4f);
}

TEST_CASE("missing gradient names the parameter") {
  Optimizer opt(OptimConfig{});
  ParamStore store = single_param("block3/mlp/fc1/weight", {1.0f});
  CHECK_THROWS_WITH(opt.step(store),
                    Catch::Matchers::ContainsSubstring("block3/mlp/fc1/weight"));
}

TEST_CASE("moment buffers exist only after a gradient arrived") {
  Optimizer opt(OptimConfig{});
  ParamStore store = single_param("a", {1.0f});
  store.add("b", Tensor::from_data({1}, {2.0f}, true));
  CHECK_FALSE(opt.has_state("a"));
  Tensor loss = op::sum(op::mul(store.at("a"), store.at("a")));
  backward(loss);
  ParamStore only_a;
  only_a.add("a", store.at("a"));
  opt.step(only_a);
  CHECK(opt.has_state("a"));
  CHECK_FALSE(opt.has_state("b"));
}

TEST_CASE("reset and retain drop moment buffers") {
  Optimizer opt(OptimConfig{});
  ParamStore store = single_param("a", {1.0f});
  store.at("a").ensure_grad()[0] = 1.0f;
  opt.step(store);
  REQUIRE(opt.has_state("a"));
  opt.reset_param("a");
  CHECK_FALSE(opt.has_state("a"));
  store.at("a").ensure_grad()[0] = 1.0f;
  opt.step(store);
  opt.retain_only({});
  CHECK_FALSE(opt.has_state("a"));
}

TEST_CASE("decoupled weight decay acts even with zero gradient") {
  OptimConfig cfg;
  cfg.lr = 0.1f;
  cfg.weight_decay = 0.5f;
  Optimizer opt(cfg);
  ParamStore store = single_param("w", {2.0f});
  store.at("w").ensure_grad();
  opt.step(store);
  CHECK(store.at("w").data()[0] == Catch::Approx(2.0f * (1.0f - 0.1f * 0.5f)).margin(1e-6));
}

TEST_CASE("identical seeds give bitwise-identical descent") {
  auto run = [] {
    Rng rng(99);
    OptimConfig cfg;
    cfg.lr = 0.01f;
    Optimizer opt(cfg);
    ParamStore store;
    store.add("w", test_util::random_tensor({4, 4}, rng));
    store.add("b", test_util::random_tensor({4}, rng));
    for (int i = 0; i < 20; ++i) {
      store.zero_grads();
      Tensor x = test_util::random_tensor({2, 4}, rng, false);
      Tensor y = op::linear(x, store.at("w"), store.at("b"));
      Tensor loss = op::mean(op::mul(y, y));
      backward(loss);
      opt.step(store);
    }
    return store;
  };
  ParamStore a = run();
  ParamStore b = run();
  CHECK(ParamStore::equal(a, b));
}
