// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "autoprog/rng.hpp"
#include "autoprog/tensor.hpp"

namespace autoprog::ops {

// Elementwise.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);
Tensor gelu(const Tensor& x);

// out = x + alpha[0] * y, with alpha a trainable one-element tensor.
Tensor add_scaled_residual(const Tensor& x, const Tensor& y, const Tensor& alpha);

// Stochastic depth over the leading (sample) dimension: each sample's branch
// is dropped with probability `prob`, survivors scaled by 1/(1-prob).
Tensor drop_path(const Tensor& x, float prob, Rng& rng);

// (R,K) x (K,C) -> (R,C).
Tensor matmul(const Tensor& a, const Tensor& b);
// x (..., K) contracted with w (K, C), plus optional bias (C).
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias = {});
// a (..., R, K) x b (..., K, C) over matching leading dims, with optional
// transposes of the trailing two axes and a scalar multiplier.
Tensor batched_matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b,
                      float alpha = 1.0f);

// Broadcast adds.
Tensor add_bias(const Tensor& x, const Tensor& bias);     // bias over last dim
Tensor add_rows(const Tensor& x, const Tensor& rows);     // rows (R,C) over x (B,R,C)

// Shape plumbing (copying).
Tensor reshape(const Tensor& x, std::vector<int> new_shape);
Tensor slice_lastdim(const Tensor& x, int offset, int length);
// (A,B,C,D) -> (A,C,B,D).
Tensor swap_middle_axes(const Tensor& x);
// Fused slice + head split: qkv (B,N,3D), which in {0,1,2} -> (B,H,N,D/H).
Tensor split_heads(const Tensor& qkv, int heads, int which);
// (B,H,N,dh) -> (B,N,H*dh); inverse layout of split_heads.
Tensor merge_heads(const Tensor& x);

// Reductions / normalizations.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor softmax_lastdim(const Tensor& x);
Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps);
// Mean cross-entropy of logits (B, C) against integer labels.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

// Token plumbing for the ViT.
Tensor prepend_token(const Tensor& tokens, const Tensor& cls);  // (B,N,D),(D) -> (B,N+1,D)
Tensor select_token(const Tensor& x, int index);                // (B,N,D) -> (B,D)
// (B,S,S,C) -> (B,(S/p)^2, p*p*C), patches row-major.
Tensor patchify(const Tensor& images, int patch);

// Bilinear, align-corners, no antialiasing. Images are (B,H,W,C).
Tensor resize_bilinear(const Tensor& images, int out_h, int out_w);
// Positional encoding (1+s*s, D) -> (1+t*t, D); row 0 is copied verbatim and
// the s x s grid portion is bilinearly resampled.
Tensor interpolate_pos_encoding(const Tensor& pe, int src_grid, int dst_grid);

}  // namespace autoprog::ops
