// SPDX-License-Identifier: Apache-2.0
#include "autoprog/model.hpp"

#include <cmath>
#include <stdexcept>

namespace autoprog {

namespace {

constexpr float kInitStd = 0.02f;

bool is_weight_name(const std::string& name) {
  return name.ends_with("/weight") || name == "cls_token" || name == "pos_embed";
}

bool is_gamma_name(const std::string& name) { return name.ends_with("/gamma"); }

std::vector<ParamDef> shared_param_defs(const ModelConfig& cfg, const SubNetSpec& spec) {
  const int d = cfg.embed_dim;
  const int patch_dim = cfg.patch * cfg.patch * 3;
  return {
      {"stem/weight", {patch_dim, d}},
      {"stem/bias", {d}},
      {"cls_token", {d}},
      {"pos_embed", {1 + spec.grid * spec.grid, d}},
      {"head/ln/gamma", {d}},
      {"head/ln/beta", {d}},
      {"head/fc/weight", {d, cfg.classes}},
      {"head/fc/bias", {cfg.classes}},
  };
}

}  // namespace

std::vector<ParamDef> block_param_shapes(const ModelConfig& cfg, int block) {
  const int d = cfg.embed_dim;
  const int hidden = static_cast<int>(std::lround(cfg.mlp_ratio * d));
  const std::string p = block_prefix(block);
  return {
      {p + "/ln1/gamma", {d}},
      {p + "/ln1/beta", {d}},
      {p + "/attn/qkv/weight", {d, 3 * d}},
      {p + "/attn/qkv/bias", {3 * d}},
      {p + "/attn/proj/weight", {d, d}},
      {p + "/attn/proj/bias", {d}},
      {p + "/ln2/gamma", {d}},
      {p + "/ln2/beta", {d}},
      {p + "/mlp/fc1/weight", {d, hidden}},
      {p + "/mlp/fc1/bias", {hidden}},
      {p + "/mlp/fc2/weight", {hidden, d}},
      {p + "/mlp/fc2/bias", {d}},
  };
}

std::string SubNetSpec::str() const {
  return "(depth=" + std::to_string(depth) + ", grid=" + std::to_string(grid) + ")";
}

void ModelConfig::validate() const {
  if (max_depth < 1 || max_grid < 1 || patch < 1 || embed_dim < 1 || heads < 1 || classes < 2) {
    throw std::invalid_argument("ModelConfig: all dimensions must be positive");
  }
  if (embed_dim % heads != 0) {
    throw std::invalid_argument("ModelConfig: embed_dim " + std::to_string(embed_dim) +
                                " not divisible by heads " + std::to_string(heads));
  }
  if (mlp_ratio <= 0.0f) throw std::invalid_argument("ModelConfig: mlp_ratio must be positive");
}

void ModelConfig::validate_spec(const SubNetSpec& spec) const {
  if (spec.depth < 1 || spec.depth > max_depth || spec.grid < 1 || spec.grid > max_grid) {
    throw std::invalid_argument("sub-network spec " + spec.str() + " out of bounds for model (" +
                                std::to_string(max_depth) + ", " + std::to_string(max_grid) + ")");
  }
}

std::string block_prefix(int index) { return "block" + std::to_string(index); }

Tensor init_param(const std::string& name, const std::vector<int>& shape, std::uint64_t seed) {
  Tensor t = Tensor::zeros(shape, /*requires_grad=*/true);
  if (is_gamma_name(name)) {
    for (float& v : t.data()) v = 1.0f;
  } else if (is_weight_name(name)) {
    Rng rng(mix_seed(seed, hash_name(name)));
    for (float& v : t.data()) v = rng.trunc_normal(kInitStd);
  }
  // biases, betas and residual scales stay zero
  return t;
}

ParamStore build_model(const ModelConfig& cfg, const SubNetSpec& spec, std::uint64_t seed) {
  cfg.validate();
  cfg.validate_spec(spec);
  ParamStore store;
  for (const auto& def : shared_param_defs(cfg, spec)) {
    store.add(def.name, init_param(def.name, def.shape, seed));
  }
  for (int b = 0; b < spec.depth; ++b) {
    for (const auto& def : block_param_shapes(cfg, b)) {
      store.add(def.name, init_param(def.name, def.shape, seed));
    }
  }
  return store;
}

int pe_grid_of(const Tensor& pos_embed) {
  const int rows = pos_embed.dim(0) - 1;
  const int g = static_cast<int>(std::lround(std::sqrt(static_cast<double>(rows))));
  if (g < 1 || g * g != rows) {
    throw std::invalid_argument("positional encoding with " + std::to_string(rows + 1) +
                                " rows has no square grid portion");
  }
  return g;
}

int store_depth(const ParamStore& params) {
  int depth = 0;
  while (params.has(block_prefix(depth) + "/ln1/gamma")) ++depth;
  return depth;
}

Tensor resize_input(const Tensor& batch, int target_grid, int patch) {
  if (target_grid < 1 || patch < 1) {
    throw std::invalid_argument("resize_input: target grid and patch must be positive");
  }
  const int side = target_grid * patch;
  return ops::resize_bilinear(batch, side, side);
}

Tensor vit_forward(const ParamStore& params, const ModelConfig& cfg, const SubNetSpec& spec,
                   const Tensor& batch, const ForwardOptions& opts) {
  // Structural validation only: evaluation may legitimately run at a larger
  // grid than the model was trained on (positional encoding interpolated
  // up), so the config bounds are not enforced here.
  if (spec.depth < 1 || spec.grid < 1) {
    throw std::invalid_argument("vit_forward: invalid spec " + spec.str());
  }
  if (!params.has(block_prefix(spec.depth - 1) + "/ln1/gamma")) {
    throw std::invalid_argument("vit_forward: store has no block " +
                                std::to_string(spec.depth - 1) + " for spec " + spec.str());
  }
  const int side = cfg.input_side(spec);
  if (batch.ndim() != 4 || batch.dim(1) != side || batch.dim(2) != side || batch.dim(3) != 3) {
    throw std::invalid_argument("vit_forward: batch " + shape_str(batch.shape()) +
                                " does not match spec " + spec.str() + " input side " +
                                std::to_string(side));
  }
  const bool use_drop = opts.training && opts.drop_path > 0.0f;
  if (use_drop && opts.rng == nullptr) {
    throw std::invalid_argument("vit_forward: drop_path needs an rng in training mode");
  }
  const int d = cfg.embed_dim;
  const int heads = cfg.heads;
  const int head_dim = d / heads;

  Tensor x = ops::patchify(batch, cfg.patch);
  x = ops::linear(x, params.at("stem/weight"), params.at("stem/bias"));
  x = ops::prepend_token(x, params.at("cls_token"));

  const Tensor& pe = params.at("pos_embed");
  const int pe_grid = pe_grid_of(pe);
  Tensor pe_used = (pe_grid == spec.grid)
                       ? pe
                       : ops::interpolate_pos_encoding(pe, pe_grid, spec.grid);
  x = ops::add_rows(x, pe_used);

  for (int b = 0; b < spec.depth; ++b) {
    const std::string p = block_prefix(b);
    const bool has_scale = params.has(p + "/res_scale");

    Tensor h = ops::layernorm(x, params.at(p + "/ln1/gamma"), params.at(p + "/ln1/beta"),
                              kLayerNormEps);
    Tensor qkv = ops::linear(h, params.at(p + "/attn/qkv/weight"), params.at(p + "/attn/qkv/bias"));
    Tensor q = ops::split_heads(qkv, heads, 0);
    Tensor k = ops::split_heads(qkv, heads, 1);
    Tensor v = ops::split_heads(qkv, heads, 2);
    const float attn_scale = 1.0f / std::sqrt(static_cast<float>(head_dim));
    Tensor scores = ops::batched_matmul(q, k, false, true, attn_scale);
    Tensor probs = ops::softmax_lastdim(scores);
    Tensor ctx = ops::merge_heads(ops::batched_matmul(probs, v, false, false));
    Tensor attn_out =
        ops::linear(ctx, params.at(p + "/attn/proj/weight"), params.at(p + "/attn/proj/bias"));
    if (use_drop) attn_out = ops::drop_path(attn_out, opts.drop_path, *opts.rng);
    x = has_scale ? ops::add_scaled_residual(x, attn_out, params.at(p + "/res_scale"))
                  : ops::add(x, attn_out);

    Tensor h2 = ops::layernorm(x, params.at(p + "/ln2/gamma"), params.at(p + "/ln2/beta"),
                               kLayerNormEps);
    Tensor mid = ops::linear(h2, params.at(p + "/mlp/fc1/weight"), params.at(p + "/mlp/fc1/bias"));
    mid = ops::gelu(mid);
    Tensor mlp_out =
        ops::linear(mid, params.at(p + "/mlp/fc2/weight"), params.at(p + "/mlp/fc2/bias"));
    if (use_drop) mlp_out = ops::drop_path(mlp_out, opts.drop_path, *opts.rng);
    x = has_scale ? ops::add_scaled_residual(x, mlp_out, params.at(p + "/res_scale"))
                  : ops::add(x, mlp_out);
  }

  x = ops::layernorm(x, params.at("head/ln/gamma"), params.at("head/ln/beta"), kLayerNormEps);
  Tensor cls = ops::select_token(x, 0);
  return ops::linear(cls, params.at("head/fc/weight"), params.at("head/fc/bias"));
}

std::size_t param_count(const ModelConfig& cfg, const SubNetSpec& spec) {
  cfg.validate_spec(spec);
  std::size_t per_block = 0;
  for (const auto& def : block_param_shapes(cfg, 0)) per_block += shape_numel(def.shape);
  const std::size_t pe = static_cast<std::size_t>(1 + spec.grid * spec.grid) *
                         static_cast<std::size_t>(cfg.embed_dim);
  return static_cast<std::size_t>(spec.depth) * per_block + pe;
}

}  // namespace autoprog
