// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "autoprog/model.hpp"
#include "test_util.hpp"

using namespace autoprog;
namespace op = autoprog::ops;
using test_util::random_tensor;

namespace {

ModelConfig toy_config() {
  ModelConfig cfg;
  cfg.max_depth = 4;
  cfg.max_grid = 4;
  cfg.patch = 4;
  cfg.embed_dim = 32;
  cfg.heads = 4;
  cfg.mlp_ratio = 2.0f;
  cfg.classes = 10;
  return cfg;
}

}  // namespace

TEST_CASE("build_model covers the full spec and is deterministic") {
  const ModelConfig cfg = toy_config();
  ParamStore a = build_model(cfg, cfg.full_spec(), 42);
  ParamStore b = build_model(cfg, cfg.full_spec(), 42);
  CHECK(ParamStore::equal(a, b));
  CHECK(store_depth(a) == 4);
  ParamStore c = build_model(cfg, cfg.full_spec(), 43);
  CHECK_FALSE(ParamStore::equal(a, c));
}

TEST_CASE("positional encoding shape follows the grid") {
  ModelConfig cfg = toy_config();
  ParamStore store = build_model(cfg, {2, 4}, 7);
  CHECK(store.at("pos_embed").shape() == std::vector<int>{17, 32});
  CHECK(store_depth(store) == 2);
  CHECK(pe_grid_of(store.at("pos_embed")) == 4);
}

TEST_CASE("out-of-bounds specs are rejected") {
  const ModelConfig cfg = toy_config();
  CHECK_THROWS_WITH(build_model(cfg, {5, 4}, 1), Catch::Matchers::ContainsSubstring("out of bounds"));
  CHECK_THROWS_WITH(build_model(cfg, {4, 5}, 1), Catch::Matchers::ContainsSubstring("out of bounds"));
  CHECK_THROWS_WITH(build_model(cfg, {0, 4}, 1), Catch::Matchers::ContainsSubstring("out of bounds"));
}

TEST_CASE("forward produces logits and is pure") {
  const ModelConfig cfg = toy_config();
  const SubNetSpec spec{3, 4};
  ParamStore store = build_model(cfg, spec, 5);
  Rng rng(1);
  Tensor batch = random_tensor({2, 16, 16, 3}, rng, false);
  Tensor a = vit_forward(store, cfg, spec, batch);
  Tensor b = vit_forward(store, cfg, spec, batch);
  CHECK(a.shape() == std::vector<int>{2, 10});
  CHECK(a.data() == b.data());
}

TEST_CASE("forward rejects invalid depth and mismatched batch side") {
  const ModelConfig cfg = toy_config();
  ParamStore store = build_model(cfg, {2, 4}, 5);
  Rng rng(2);
  Tensor batch = random_tensor({1, 16, 16, 3}, rng, false);
  CHECK_THROWS_WITH(vit_forward(store, cfg, {0, 4}, batch),
                    Catch::Matchers::ContainsSubstring("invalid spec"));
  CHECK_THROWS_WITH(vit_forward(store, cfg, {3, 4}, batch),
                    Catch::Matchers::ContainsSubstring("no block 2"));
  Tensor wrong = random_tensor({1, 12, 12, 3}, rng, false);
  CHECK_THROWS_WITH(vit_forward(store, cfg, {2, 4}, wrong),
                    Catch::Matchers::ContainsSubstring("input side"));
}

TEST_CASE("forward consumes exactly the blocks below the requested depth") {
  const ModelConfig cfg = toy_config();
  const SubNetSpec small{2, 4};
  ParamStore full = build_model(cfg, cfg.full_spec(), 11);
  // restricted store holding only blocks [0,2) plus shared tensors
  ParamStore restricted;
  for (const auto& [name, t] : full) {
    if (name.starts_with("block2/") || name.starts_with("block3/")) continue;
    restricted.add(name, t);
  }
  Rng rng(3);
  Tensor batch = random_tensor({2, 16, 16, 3}, rng, false);
  Tensor from_full = vit_forward(full, cfg, small, batch);
  Tensor from_restricted = vit_forward(restricted, cfg, small, batch);
  CHECK(from_full.data() == from_restricted.data());
}

TEST_CASE("resize_input is exact on the identity and preserves constants") {
  Tensor img = Tensor::full({2, 8, 8, 3}, 0.25f);
  Tensor same = resize_input(img, 2, 4);
  CHECK(same.shape() == std::vector<int>{2, 8, 8, 3});
  for (std::size_t i = 0; i < img.numel(); ++i) CHECK(same.data()[i] == img.data()[i]);
  Tensor down = resize_input(img, 1, 4);
  CHECK(down.shape() == std::vector<int>{2, 4, 4, 3});
  for (float v : down.data()) CHECK(v == Catch::Approx(0.25f).margin(1e-6));
}

TEST_CASE("positional-encoding interpolation identity and constancy") {
  Rng rng(4);
  Tensor pe = random_tensor({10, 8}, rng, false);
  Tensor same = op::interpolate_pos_encoding(pe, 3, 3);
  for (std::size_t i = 0; i < pe.numel(); ++i) {
    CHECK(std::abs(same.data()[i] - pe.data()[i]) < 1e-6f);
  }
  Tensor flat = Tensor::full({5, 4}, 1.5f);
  Tensor up = op::interpolate_pos_encoding(flat, 2, 5);
  CHECK(up.shape() == std::vector<int>{26, 4});
  for (float v : up.data()) CHECK(v == Catch::Approx(1.5f).margin(1e-6));
}

TEST_CASE("2->4 grid interpolation follows the bilinear oracle and keeps ramps monotone") {
  // one-dimensional ramp along x, constant along y, single feature dim
  Tensor pe = Tensor::zeros({5, 1});
  pe.data() = {9.0f, /*grid*/ 0.0f, 1.0f, 0.0f, 1.0f};
  Tensor out = op::interpolate_pos_encoding(pe, 2, 4);
  REQUIRE(out.shape() == std::vector<int>{17, 1});
  CHECK(out.data()[0] == 9.0f);  // class slot copied verbatim
  const float third = 1.0f / 3.0f;
  for (int y = 0; y < 4; ++y) {
    const float* row = out.data().data() + 1 + y * 4;
    CHECK(row[0] == Catch::Approx(0.0f).margin(1e-6));
    CHECK(row[1] == Catch::Approx(third).margin(1e-6));
    CHECK(row[2] == Catch::Approx(2 * third).margin(1e-6));
    CHECK(row[3] == Catch::Approx(1.0f).margin(1e-6));
    for (int x = 1; x < 4; ++x) CHECK(row[x] > row[x - 1]);
  }
}

TEST_CASE("smooth positional fields survive a down-up round trip") {
  // low-frequency field: a quarter sine period across the grid
  const int n_small = 4, n_large = 8, d = 6;
  Tensor pe = Tensor::zeros({1 + n_small * n_small, d});
  for (int y = 0; y < n_small; ++y) {
    for (int x = 0; x < n_small; ++x) {
      for (int c = 0; c < d; ++c) {
        pe.data()[(1 + static_cast<std::size_t>(y) * n_small + x) * d + c] =
            std::sin(0.5 * M_PI * y / (n_small - 1) + 0.3 * c) *
            std::cos(0.5 * M_PI * x / (n_small - 1));
      }
    }
  }
  Tensor up = op::interpolate_pos_encoding(pe, n_small, n_large);
  Tensor back = op::interpolate_pos_encoding(up, n_large, n_small);
  float max_abs = 0.0f;
  for (std::size_t i = 0; i < pe.numel(); ++i) {
    max_abs = std::max(max_abs, std::abs(back.data()[i] - pe.data()[i]));
  }
  CHECK(max_abs < 5e-2f);
}

TEST_CASE("param_count is monotone and counts depth plus positional encoding") {
  const ModelConfig cfg = toy_config();
  CHECK(param_count(cfg, {1, 1}) < param_count(cfg, {2, 1}));
  CHECK(param_count(cfg, {2, 1}) < param_count(cfg, {2, 4}));
  const std::size_t pe_small = static_cast<std::size_t>(1 + 1) * 32;
  const std::size_t pe_large = static_cast<std::size_t>(1 + 16) * 32;
  CHECK(param_count(cfg, {2, 4}) - param_count(cfg, {2, 1}) == pe_large - pe_small);
}

TEST_CASE("drop-path training forward differs from eval but stays deterministic under seed") {
  const ModelConfig cfg = toy_config();
  const SubNetSpec spec{2, 4};
  ParamStore store = build_model(cfg, spec, 5);
  Rng data_rng(10);
  Tensor batch = random_tensor({4, 16, 16, 3}, data_rng, false);
  Rng r1(77), r2(77);
  ForwardOptions fo1{true, 0.5f, &r1};
  ForwardOptions fo2{true, 0.5f, &r2};
  Tensor a = vit_forward(store, cfg, spec, batch, fo1);
  Tensor b = vit_forward(store, cfg, spec, batch, fo2);
  CHECK(a.data() == b.data());
  Tensor eval = vit_forward(store, cfg, spec, batch);
  CHECK(a.data() != eval.data());
}
