// SPDX-License-Identifier: Apache-2.0
#include "reference_vit.hpp"

#include <cmath>

#include "autoprog/rng.hpp"

namespace refvit {

using autoprog::ModelConfig;
using autoprog::ParamStore;
using autoprog::SubNetSpec;
using refops::DTensor;

DParams from_store(const ParamStore& store) {
  DParams out;
  for (const auto& [name, t] : store) out.emplace(name, refops::from(t));
  return out;
}

double loss(const DParams& params, const ModelConfig& cfg, const SubNetSpec& spec,
            const DTensor& batch, const std::vector<int>& labels) {
  const int d = cfg.embed_dim;
  const int heads = cfg.heads;
  const int head_dim = d / heads;
  const int b = batch.dim(0);
  const int tokens = spec.grid * spec.grid + 1;
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  auto P = [&](const std::string& name) -> const DTensor& { return params.at(name); };

  DTensor x = refops::patchify(batch, cfg.patch);
  x = refops::linear(x, P("stem/weight"), &P("stem/bias"));
  x = refops::prepend_token(x, P("cls_token"));
  const DTensor& pe = P("pos_embed");
  const int pe_grid =
      static_cast<int>(std::lround(std::sqrt(static_cast<double>(pe.dim(0) - 1))));
  if (pe_grid == spec.grid) {
    x = refops::add_rows(x, pe);
  } else {
    x = refops::add_rows(x, refops::interpolate_pos_encoding(pe, pe_grid, spec.grid));
  }

  for (int blk = 0; blk < spec.depth; ++blk) {
    const std::string p = autoprog::block_prefix(blk);
    const bool has_scale = params.count(p + "/res_scale") > 0;

    DTensor h = refops::layernorm(x, P(p + "/ln1/gamma"), P(p + "/ln1/beta"),
                                  autoprog::kLayerNormEps);
    DTensor qkv = refops::linear(h, P(p + "/attn/qkv/weight"), &P(p + "/attn/qkv/bias"));
    DTensor q = refops::swap_middle_axes(
        refops::reshape(refops::slice_lastdim(qkv, 0, d), {b, tokens, heads, head_dim}));
    DTensor k = refops::swap_middle_axes(
        refops::reshape(refops::slice_lastdim(qkv, d, d), {b, tokens, heads, head_dim}));
    DTensor v = refops::swap_middle_axes(
        refops::reshape(refops::slice_lastdim(qkv, 2 * d, d), {b, tokens, heads, head_dim}));
    DTensor scores = refops::batched_matmul(q, k, false, true, attn_scale);
    DTensor probs = refops::softmax_lastdim(scores);
    DTensor ctx = refops::batched_matmul(probs, v, false, false);
    ctx = refops::reshape(refops::swap_middle_axes(ctx), {b, tokens, d});
    DTensor attn_out = refops::linear(ctx, P(p + "/attn/proj/weight"), &P(p + "/attn/proj/bias"));
    x = has_scale ? refops::add_scaled_residual(x, attn_out, P(p + "/res_scale"))
                  : refops::add(x, attn_out);

    DTensor h2 = refops::layernorm(x, P(p + "/ln2/gamma"), P(p + "/ln2/beta"),
                                   autoprog::kLayerNormEps);
    DTensor mid = refops::linear(h2, P(p + "/mlp/fc1/weight"), &P(p + "/mlp/fc1/bias"));
    mid = refops::gelu(mid);
    DTensor mlp_out = refops::linear(mid, P(p + "/mlp/fc2/weight"), &P(p + "/mlp/fc2/bias"));
    x = has_scale ? refops::add_scaled_residual(x, mlp_out, P(p + "/res_scale"))
                  : refops::add(x, mlp_out);
  }

  x = refops::layernorm(x, P("head/ln/gamma"), P("head/ln/beta"), autoprog::kLayerNormEps);
  DTensor cls = refops::select_token(x, 0);
  DTensor logits = refops::linear(cls, P("head/fc/weight"), &P("head/fc/bias"));
  return refops::cross_entropy(logits, labels).v[0];
}

FdSummary fd_check_params(ParamStore& store, const ModelConfig& cfg, const SubNetSpec& spec,
                          const autoprog::Tensor& batch, const std::vector<int>& labels,
                          int samples, std::uint64_t seed, double tol, bool* ok) {
  DParams dparams = from_store(store);
  const DTensor dbatch = refops::from(batch);

  const std::vector<std::string> names = store.names();
  autoprog::Rng rng(seed);
  FdSummary summary;
  bool all_ok = true;
  double rel_sum = 0.0;
  for (int s = 0; s < samples; ++s) {
    const std::string& name = names[static_cast<std::size_t>(rng.uniform_below(names.size()))];
    DTensor& dt = dparams.at(name);
    const std::size_t k = static_cast<std::size_t>(rng.uniform_below(dt.numel()));
    const double orig = dt.v[k];
    const double h = 1e-3 * std::max(1.0, std::abs(orig));
    auto central = [&](double hh) {
      dt.v[k] = orig + hh;
      const double up = loss(dparams, cfg, spec, dbatch, labels);
      dt.v[k] = orig - hh;
      const double down = loss(dparams, cfg, spec, dbatch, labels);
      dt.v[k] = orig;
      return (up - down) / (2.0 * hh);
    };
    // Richardson extrapolation cancels the O(h^2) truncation term
    const double fd = (4.0 * central(0.5 * h) - central(h)) / 3.0;
    const double analytic = store.at(name).grad()[k];
    // near-zero components are held to the absolute tolerance tol * 1e-4
    const double rel =
        std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-4});
    summary.max_rel = std::max(summary.max_rel, rel);
    rel_sum += rel;
    ++summary.checked;
    if (rel >= tol) all_ok = false;
  }
  summary.mean_rel = summary.checked ? rel_sum / summary.checked : 0.0;
  if (ok) *ok = all_ok;
  return summary;
}

}  // namespace refvit
