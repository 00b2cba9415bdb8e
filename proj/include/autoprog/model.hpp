// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "autoprog/ops.hpp"
#include "autoprog/param_store.hpp"

namespace autoprog {

// A point in the growth space: transformer depth and patch-grid side. The
// input side for a spec is grid * patch, so the patch count is grid^2.
struct SubNetSpec {
  int depth = 0;
  int grid = 0;

  bool operator==(const SubNetSpec&) const = default;
  bool dominates(const SubNetSpec& o) const { return depth >= o.depth && grid >= o.grid; }
  std::string str() const;
};

struct ModelConfig {
  int max_depth = 8;
  int max_grid = 8;
  int patch = 4;
  int embed_dim = 64;
  int heads = 4;
  float mlp_ratio = 4.0f;
  int classes = 10;

  SubNetSpec full_spec() const { return {max_depth, max_grid}; }
  int input_side(const SubNetSpec& spec) const { return spec.grid * patch; }
  void validate() const;
  void validate_spec(const SubNetSpec& spec) const;
};

constexpr float kLayerNormEps = 1e-6f;

// Parameter names are hierarchical: stem/*, cls_token, pos_embed, head/*,
// and block<i>/* with block indices contiguous from the input side.
std::string block_prefix(int index);

// Fresh parameters for one sub-network. Weights are truncated-normal
// (std 0.02), biases zero, layernorm affine identity; every tensor draws
// from a stream derived from (seed, name) so initialization does not depend
// on construction order.
ParamStore build_model(const ModelConfig& cfg, const SubNetSpec& spec, std::uint64_t seed);

// Single-tensor initializer used by build_model; growth operators reuse it
// for freshly added layers.
Tensor init_param(const std::string& name, const std::vector<int>& shape, std::uint64_t seed);

struct ParamDef {
  std::string name;
  std::vector<int> shape;
};

// Full names and shapes of the tensors making up one transformer block.
std::vector<ParamDef> block_param_shapes(const ModelConfig& cfg, int block);

struct ForwardOptions {
  bool training = false;
  float drop_path = 0.0f;
  Rng* rng = nullptr;  // required when training with drop_path > 0
};

// Pure function of (params, spec, batch): logits (B, classes). The batch is
// (B, S, S, 3) with S == spec.grid * patch. When the stored positional
// encoding is for a different grid it is bilinearly interpolated on the fly
// (gradients flow through the interpolation).
Tensor vit_forward(const ParamStore& params, const ModelConfig& cfg, const SubNetSpec& spec,
                   const Tensor& batch, const ForwardOptions& opts = {});

// Bilinear align-corners resize of an image batch to side grid * patch.
Tensor resize_input(const Tensor& batch, int target_grid, int patch);

// Grid side stored in a positional-encoding tensor of shape (1 + n^2, d).
int pe_grid_of(const Tensor& pos_embed);
// Number of contiguous block indices present in the store.
int store_depth(const ParamStore& params);

// Depth-dependent parameter count plus the positional encoding; the size
// measure used by the stage-space filter.
std::size_t param_count(const ModelConfig& cfg, const SubNetSpec& spec);

}  // namespace autoprog
