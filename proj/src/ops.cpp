// SPDX-License-Identifier: Apache-2.0
#include "autoprog/ops.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/SpecialFunctions>

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <utility>

namespace autoprog::ops {

namespace {

using detail::TensorNode;

using Mat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Mat>;
using CMatMap = Eigen::Map<const Mat>;
using ArrMap = Eigen::Map<Eigen::ArrayXf>;
using CArrMap = Eigen::Map<const Eigen::ArrayXf>;

bool any_requires_grad(std::initializer_list<Tensor> ts) {
  for (const Tensor& t : ts) {
    if (t.defined() && t.requires_grad()) return true;
  }
  return false;
}

// Allocates the output node; wires parents and grad requirement only when the
// graph is being recorded.
Tensor make_out(std::vector<int> shape, std::initializer_list<Tensor> parents) {
  Tensor out = Tensor::zeros(std::move(shape));
  if (grad_enabled() && any_requires_grad(parents)) {
    out.node()->requires_grad = true;
    for (const Tensor& p : parents) out.node()->parents.push_back(p.node());
  }
  return out;
}

bool recording(const Tensor& out) { return !out.node()->parents.empty(); }

TensorNode& parent(TensorNode& n, std::size_t i) { return *n.parents[i]; }

std::vector<float>& parent_grad(TensorNode& n, std::size_t i) {
  TensorNode& p = parent(n, i);
  if (!p.has_grad) {
    p.grad.assign(p.value.size(), 0.0f);
    p.has_grad = true;
  }
  return p.grad;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  }
}

int last_dim(const Tensor& t) { return t.shape().back(); }

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = make_out(a.shape(), {a, b});
  const std::size_t n = out.numel();
  const float* pa = a.data().data();
  const float* pb = b.data().data();
  float* po = out.data().data();
  for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
  if (recording(out)) {
    out.node()->backward_fn = [](TensorNode& nd) {
      const std::size_t m = nd.numel();
      for (std::size_t k = 0; k < 2; ++k) {
        if (!parent(nd, k).requires_grad) continue;
        float* pg = parent_grad(nd, k).data();
        const float* g = nd.grad.data();
        for (std::size_t i = 0; i < m; ++i) pg[i] += g[i];
      }
    };
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = make_out(a.shape(), {a, b});
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
  if (recording(out)) {
    out.node()->backward_fn = [](TensorNode& nd) {
      const std::size_t m = nd.numel();
      const float* g = nd.grad.data();
      if (parent(nd, 0).requires_grad) {
        float* pg = parent_grad(nd, 0).data();
        for (std::size_t i = 0; i < m; ++i) pg[i] += g[i];
      }
      if (parent(nd, 1).requires_grad) {
        float* pg = parent_grad(nd, 1).data();
        for (std::size_t i = 0; i < m; ++i) pg[i] -= g[i];
      }
    };
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out = make_out(a.shape(), {a, b});
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (recording(out)) {
    out.node()->backward_fn = [](TensorNode& nd) {
      const std::size_t m = nd.numel();
      const float* g = nd.grad.data();
      if (parent(nd, 0).requires_grad) {
        float* pg = parent_grad(nd, 0).data();
        const float* pb = parent(nd, 1).value.data();
        for (std::size_t i = 0; i < m; ++i) pg[i] += g[i] * pb[i];
      }
      if (parent(nd, 1).requires_grad) {
        float* pg = parent_grad(nd, 1).data();
        const float* pa = parent(nd, 0).value.data();
        for (std::size_t i = 0; i < m; ++i) pg[i] += g[i] * pa[i];
      }
    };
  }
  return out;
}

Tensor scale(const Tensor& a, float s) {
  Tensor out = make_out(a.shape(), {a});
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * s;
  if (recording(out)) {
    out.node()->backward_fn = [s](TensorNode& nd) {
      if (!parent(nd, 0).requires_grad) return;
      float* pg = parent_grad(nd, 0).data();
      const float* g = nd.grad.data();
      const std::size_t m = nd.numel();
      for (std::size_t i = 0; i < m; ++i) pg[i] += s * g[i];
    };
  }
  return out;
}

Tensor gelu(const Tensor& x) {
  Tensor out = make_out(x.shape(), {x});
  const auto n = static_cast<Eigen::Index>(out.numel());
  constexpr float inv_sqrt2 = 0.7071067811865475f;
  {
    CArrMap vx(x.data().data(), n);
    ArrMap vo(out.data().data(), n);
    vo = 0.5f * vx * (1.0f + (vx * inv_sqrt2).erf());
  }
  if (recording(out)) {
    out.node()->backward_fn = [n](TensorNode& nd) {
      if (!parent(nd, 0).requires_grad) return;
      constexpr float inv_sqrt2_ = 0.7071067811865475f;
      constexpr float inv_sqrt2pi = 0.3989422804014327f;
      ArrMap pg(parent_grad(nd, 0).data(), n);
      CArrMap vx(parent(nd, 0).value.data(), n);
      CArrMap g(nd.grad.data(), n);
      pg += g * (0.5f * (1.0f + (vx * inv_sqrt2_).erf()) +
                 vx * inv_sqrt2pi * (-0.5f * vx.square()).exp());
    };
  }
  return out;
}

Tensor add_scaled_residual(const Tensor& x, const Tensor& y, const Tensor& alpha) {
  check_same_shape(x, y, "add_scaled_residual");
  if (alpha.numel() != 1) {
    throw std::invalid_argument("add_scaled_residual: alpha must be one element, got " +
                                shape_str(alpha.shape()));
  }
  Tensor out = make_out(x.shape(), {x, y, alpha});
  const float a = alpha.data()[0];
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] + a * y.data()[i];
  if (recording(out)) {
    out.node()->backward_fn = [](TensorNode& nd) {
      const std::size_t m = nd.numel();
      const float* g = nd.grad.data();
      const float a_ = parent(nd, 2).value[0];
      if (parent(nd, 0).requires_grad) {
        float* pg = parent_grad(nd, 0).data();
        for (std::size_t i = 0; i < m; ++i) pg[i] += g[i];
      }
      if (parent(nd, 1).requires_grad) {
        float* pg = parent_grad(nd, 1).data();
        for (std::size_t i = 0; i < m; ++i) pg[i] += a_ * g[i];
      }
      if (parent(nd, 2).requires_grad) {
        const float* py = parent(nd, 1).value.data();
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += static_cast<double>(g[i]) * py[i];
        parent_grad(nd, 2)[0] += static_cast<float>(acc);
      }
    };
  }
  return out;
}

Tensor drop_path(const Tensor& x, float prob, Rng& rng) {
  if (prob <= 0.0f) return x;
  if (prob >= 1.0f) throw std::invalid_argument("drop_path: probability must be < 1");
  const int batch = x.shape().front();
  const std::size_t per = x.numel() / static_cast<std::size_t>(batch);
  std::vector<float> factor(static_cast<std::size_t>(batch));
  const float keep_scale = 1.0f / (1.0f - prob);
  for (int b = 0; b < batch; ++b) {
    factor[static_cast<std::size_t>(b)] = rng.bernoulli(prob) ? 0.0f : keep_scale;
  }
  Tensor out = make_out(x.shape(), {x});
  for (int b = 0; b < batch; ++b) {
    const float f = factor[static_cast<std::size_t>(b)];
    const float* px = x.data().data() + static_cast<std::size_t>(b) * per;
    float* po = out.data().data() + static_cast<std::size_t>(b) * per;
    for (std::size_t i = 0; i < per; ++i) po[i] = f * px[i];
  }
  if (recording(out)) {
    out.node()->backward_fn = [factor = std::move(factor), per](TensorNode& nd) {
      if (!parent(nd, 0).requires_grad) return;
      float* pg = parent_grad(nd, 0).data();
      const float* g = nd.grad.data();
      for (std::size_t b = 0; b < factor.size(); ++b) {
        const float f = factor[b];
        for (std::size_t i = 0; i < per; ++i) pg[b * per + i] += f * g[b * per + i];
      }
    };
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  }
  const int r = a.dim(0), k = a.dim(1), c = b.dim(1);
  Tensor out = make_out({r, c}, {a, b});
  CMatMap ma(a.data().data(), r, k);
  CMatMap mb(b.data().data(), k, c);
  MatMap mo(out.data().data(), r, c);
  mo.noalias() = ma * mb;
  if (recording(out)) {
    out.node()->backward_fn = [r, k, c](TensorNode& nd) {
      CMatMap g(nd.grad.data(), r, c);
      if (parent(nd, 0).requires_grad) {
        CMatMap mb_(parent(nd, 1).value.data(), k, c);
        MatMap ga(parent_grad(nd, 0).data(), r, k);
        ga.noalias() += g * mb_.transpose();
      }
      if (parent(nd, 1).requires_grad) {
        CMatMap ma_(parent(nd, 0).value.data(), r, k);
        MatMap gb(parent_grad(nd, 1).data(), k, c);
        gb.noalias() += ma_.transpose() * g;
      }
    };
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  if (w.ndim() != 2 || last_dim(x) != w.dim(0)) {
    throw std::invalid_argument("linear: incompatible shapes " + shape_str(x.shape()) + " x " +
                                shape_str(w.shape()));
  }
  const int k = w.dim(0), c = w.dim(1);
  const int rows = static_cast<int>(x.numel()) / k;
  if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != c)) {
    throw std::invalid_argument("linear: bias shape " + shape_str(bias.shape()) +
                                " does not match output dim " + std::to_string(c));
  }
  std::vector<int> out_shape = x.shape();
  out_shape.back() = c;
  Tensor out = bias.defined() ? make_out(std::move(out_shape), {x, w, bias})
                              : make_out(std::move(out_shape), {x, w});
  CMatMap mx(x.data().data(), rows, k);
  CMatMap mw(w.data().data(), k, c);
  MatMap mo(out.data().data(), rows, c);
  mo.noalias() = mx * mw;
  if (bias.defined()) {
    CMatMap mbias(bias.data().data(), 1, c);
    mo.rowwise() += mbias.row(0);
  }
  if (recording(out)) {
    const bool has_bias = bias.defined();
    out.node()->backward_fn = [rows, k, c, has_bias](TensorNode& nd) {
      CMatMap g(nd.grad.data(), rows, c);
      if (parent(nd, 0).requires_grad) {
        CMatMap mw_(parent(nd, 1).value.data(), k, c);
        MatMap gx(parent_grad(nd, 0).data(), rows, k);
        gx.noalias() += g * mw_.transpose();
      }
      if (parent(nd, 1).requires_grad) {
        CMatMap mx_(parent(nd, 0).value.data(), rows, k);
        MatMap gw(parent_grad(nd, 1).data(), k, c);
        gw.noalias() += mx_.transpose() * g;
      }
      if (has_bias && parent(nd, 2).requires_grad) {
        MatMap gb(parent_grad(nd, 2).data(), 1, c);
        gb.row(0) += g.colwise().sum();
      }
    };
  }
  return out;
}

Tensor batched_matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b, float alpha) {
  if (a.ndim() < 3 || b.ndim() != a.ndim()) {
    throw std::invalid_argument("batched_matmul: need matching >=3-d shapes, got " +
                                shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const int nd = a.ndim();
  long batches = 1;
  for (int i = 0; i < nd - 2; ++i) {
    if (a.dim(i) != b.dim(i)) {
      throw std::invalid_argument("batched_matmul: leading dims differ " + shape_str(a.shape()) +
                                  " vs " + shape_str(b.shape()));
    }
    batches *= a.dim(i);
  }
  const int ar = a.dim(nd - 2), ac = a.dim(nd - 1);
  const int br = b.dim(nd - 2), bc = b.dim(nd - 1);
  const int r = trans_a ? ac : ar;
  const int kk = trans_a ? ar : ac;
  const int kb = trans_b ? bc : br;
  const int c = trans_b ? br : bc;
  if (kk != kb) {
    throw std::invalid_argument("batched_matmul: inner dims differ " + shape_str(a.shape()) +
                                " x " + shape_str(b.shape()));
  }
  std::vector<int> out_shape(a.shape().begin(), a.shape().end() - 2);
  out_shape.push_back(r);
  out_shape.push_back(c);
  Tensor out = make_out(std::move(out_shape), {a, b});

  const std::size_t sa = static_cast<std::size_t>(ar) * ac;
  const std::size_t sb = static_cast<std::size_t>(br) * bc;
  const std::size_t so = static_cast<std::size_t>(r) * c;
  for (long g = 0; g < batches; ++g) {
    CMatMap ma(a.data().data() + g * sa, ar, ac);
    CMatMap mb(b.data().data() + g * sb, br, bc);
    MatMap mo(out.data().data() + g * so, r, c);
    if (!trans_a && !trans_b) mo.noalias() = alpha * (ma * mb);
    else if (!trans_a && trans_b) mo.noalias() = alpha * (ma * mb.transpose());
    else if (trans_a && !trans_b) mo.noalias() = alpha * (ma.transpose() * mb);
    else mo.noalias() = alpha * (ma.transpose() * mb.transpose());
  }
  if (recording(out)) {
    out.node()->backward_fn = [=](TensorNode& ndn) {
      for (long g = 0; g < batches; ++g) {
        CMatMap mg(ndn.grad.data() + g * so, r, c);
        if (parent(ndn, 0).requires_grad) {
          MatMap ga(parent_grad(ndn, 0).data() + g * sa, ar, ac);
          CMatMap mb(parent(ndn, 1).value.data() + g * sb, br, bc);
          if (!trans_a && !trans_b) ga.noalias() += alpha * (mg * mb.transpose());
          else if (!trans_a && trans_b) ga.noalias() += alpha * (mg * mb);
          else if (trans_a && !trans_b) ga.noalias() += alpha * (mb * mg.transpose());
          else ga.noalias() += alpha * (mb.transpose() * mg.transpose());
        }
        if (parent(ndn, 1).requires_grad) {
          MatMap gb(parent_grad(ndn, 1).data() + g * sb, br, bc);
          CMatMap ma(parent(ndn, 0).value.data() + g * sa, ar, ac);
          if (!trans_a && !trans_b) gb.noalias() += alpha * (ma.transpose() * mg);
          else if (!trans_a && trans_b) gb.noalias() += alpha * (mg.transpose() * ma);
          else if (trans_a && !trans_b) gb.noalias() += alpha * (ma * mg);
          else gb.noalias() += alpha * (mg.transpose() * ma.transpose());
        }
      }
    };
  }
  return out;
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (bias.ndim() != 1 || bias.dim(0) != last_dim(x)) {
    throw std::invalid_argument("add_bias: bias " + shape_str(bias.shape()) +
                                " does not match last dim of " + shape_str(x.shape()));
  }
  const int c = last_dim(x);
  const std::size_t rows = x.numel() / static_cast<std::size_t>(c);
  Tensor out = make_out(x.shape(), {x, bias});
  for (std::size_t r = 0; r < rows; ++r) {
    const float* px = x.data().data() + r * c;
    float* po = out.data().data() + r * c;
    for (int i = 0; i < c; ++i) po[i] = px[i] + bias.data()[static_cast<std::size_t>(i)];
  }
  if (recording(out)) {
    out.node()->backward_fn = [rows, c](TensorNode& nd) {
      const float* g = nd.grad.data();
      if (parent(nd, 0).requires_grad) {
        float* pg = parent_grad(nd, 0).data();
        const std::size_t m = nd.numel();
        for (std::size_t i = 0; i < m; ++i) pg[i] += g[i];
      }
      if (parent(nd, 1).requires_grad) {
        float* pg = parent_grad(nd, 1).data();
        for (std::size_t r = 0; r < rows; ++r) {
          for (int i = 0; i < c; ++i) pg[i] += g[r * c + i];
        }
      }
    };
  }
  return out;
}

Tensor add_rows(const Tensor& x, const Tensor& rows) {
  if (x.ndim() != 3 || rows.ndim() != 2 || x.dim(1) != rows.dim(0) || x.dim(2) != rows.dim(1)) {
    throw std::invalid_argument("add_rows: shapes " + shape_str(x.shape()) + " and " +
                                shape_str(rows.shape()) + " are incompatible");
  }
  const int batch = x.dim(0);
  const std::size_t per = rows.numel();
  Tensor out = make_out(x.shape(), {x, rows});
  for (int b = 0; b < batch; ++b) {
    const float* px = x.data().data() + b * per;
    float* po = out.data().data() + b * per;
    for (std::size_t i = 0; i < per; ++i) po[i] = px[i] + rows.data()[i];
  }
  if (recording(out)) {
    out.node()->backward_fn = [batch, per](TensorNode& nd) {
      const float* g = nd.grad.data();
      if (parent(nd, 0).requires_grad) {
        float* pg = parent_grad(nd, 0).data();
        const std::size_t m = nd.numel();
        for (std::size_t i = 0; i < m; ++i) pg[i] += g[i];
      }
      if (parent(nd, 1).requires_grad) {
        float* pg = parent_grad(nd, 1).data();
        for (int b = 0; b < batch; ++b) {
          for (std::size_t i = 0; i < per; ++i) pg[i] += g[b * per + i];
        }
      }
    };
  }
  return out;
}

Tensor reshape(const Tensor& x, std::vector<int> new_shape) {
  if (shape_numel(new_shape) != x.numel()) {
    throw std::invalid_argument("reshape: cannot view " + shape_str(x.shape()) + " as " +
                                shape_str(new_shape));
  }
  Tensor out = make_out(std::move(new_shape), {x});
  out.data() = x.data();
  if (recording(out)) {
    out.node()->backward_fn = [](TensorNode& nd) {
      if (!parent(nd, 0).requires_grad) return;
      float* pg = parent_grad(nd, 0).data();
      const float* g = nd.grad.data();
      const std::size_t m = nd.numel();
      for (std::size_t i = 0; i < m; ++i) pg[i] += g[i];
    };
  }
  return out;
}

Tensor slice_lastdim(const Tensor& x, int offset, int length) {
  const int c = last_dim(x);
  if (offset < 0 || length <= 0 || offset + length > c) {
    throw std::invalid_argument("slice_lastdim: slice [" + std::to_string(offset) + "," +
                                std::to_string(offset + length) + ") out of range for " +
                                shape_str(x.shape()));
  }
  const std::size_t rows = x.numel() / static_cast<std::size_t>(c);
  std::vector<int> out_shape = x.shape();
  out_shape.back() = length;
  Tensor out = make_out(std::move(out_shape), {x});
  for (std::size_t r = 0; r < rows; ++r) {
    std::memcpy(out.data().data() + r * length, x.data().data() + r * c + offset,
                sizeof(float) * static_cast<std::size_t>(length));
  }
  if (recording(out)) {
    out.node()->backward_fn = [rows, c, offset, length](TensorNode& nd) {
      if (!parent(nd, 0).requires_grad) return;
      float* pg = parent_grad(nd, 0).data();
      const float* g = nd.grad.data();
      for (std::size_t r = 0; r < rows; ++r) {
        for (int i = 0; i < length; ++i) pg[r * c + offset + i] += g[r * length + i];
      }
    };
  }
  return out;
}

Tensor swap_middle_axes(const Tensor& x) {
  if (x.ndim() != 4) {
    throw std::invalid_argument("swap_middle_axes: expected 4-d tensor, got " +
                                shape_str(x.shape()));
  }
  const int a = x.dim(0), b = x.dim(1), c = x.dim(2), d = x.dim(3);
  Tensor out = make_out({a, c, b, d}, {x});
  const float* px = x.data().data();
  float* po = out.data().data();
  for (int i = 0; i < a; ++i) {
    for (int j = 0; j < b; ++j) {
      for (int k = 0; k < c; ++k) {
        std::memcpy(po + (((static_cast<std::size_t>(i) * c + k) * b + j) * d),
                    px + (((static_cast<std::size_t>(i) * b + j) * c + k) * d),
                    sizeof(float) * static_cast<std::size_t>(d));
      }
    }
  }
  if (recording(out)) {
    out.node()->backward_fn = [a, b, c, d](TensorNode& nd) {
      if (!parent(nd, 0).requires_grad) return;
      float* pg = parent_grad(nd, 0).data();
      const float* g = nd.grad.data();
      for (int i = 0; i < a; ++i) {
        for (int j = 0; j < b; ++j) {
          for (int k = 0; k < c; ++k) {
            const float* gs = g + (((static_cast<std::size_t>(i) * c + k) * b + j) * d);
            float* ps = pg + (((static_cast<std::size_t>(i) * b + j) * c + k) * d);
            for (int l = 0; l < d; ++l) ps[l] += gs[l];
          }
        }
      }
    };
  }
  return out;
}

Tensor split_heads(const Tensor& qkv, int heads, int which) {
  if (qkv.ndim() != 3 || which < 0 || which > 2 || qkv.dim(2) % (3 * heads) != 0) {
    throw std::invalid_argument("split_heads: cannot split " + shape_str(qkv.shape()) + " into " +
                                std::to_string(heads) + " heads");
  }
  const int batch = qkv.dim(0), n = qkv.dim(1), d = qkv.dim(2) / 3;
  const int head_dim = d / heads;
  const int row = qkv.dim(2);
  Tensor out = make_out({batch, heads, n, head_dim}, {qkv});
  for (int b = 0; b < batch; ++b) {
    for (int h = 0; h < heads; ++h) {
      float* dst = out.data().data() +
                   ((static_cast<std::size_t>(b) * heads + h) * n) * head_dim;
      const float* src = qkv.data().data() + static_cast<std::size_t>(b) * n * row +
                         static_cast<std::size_t>(which) * d +
                         static_cast<std::size_t>(h) * head_dim;
      for (int t = 0; t < n; ++t) {
        std::memcpy(dst + static_cast<std::size_t>(t) * head_dim,
                    src + static_cast<std::size_t>(t) * row,
                    sizeof(float) * static_cast<std::size_t>(head_dim));
      }
    }
  }
  if (recording(out)) {
    out.node()->backward_fn = [batch, heads, n, d, head_dim, row, which](TensorNode& nd) {
      if (!parent(nd, 0).requires_grad) return;
      float* pg = parent_grad(nd, 0).data();
      const float* g = nd.grad.data();
      for (int b = 0; b < batch; ++b) {
        for (int h = 0; h < heads; ++h) {
          const float* gs = g + ((static_cast<std::size_t>(b) * heads + h) * n) * head_dim;
          float* dst = pg + static_cast<std::size_t>(b) * n * row +
                       static_cast<std::size_t>(which) * d +
                       static_cast<std::size_t>(h) * head_dim;
          for (int t = 0; t < n; ++t) {
            for (int i = 0; i < head_dim; ++i) {
              dst[static_cast<std::size_t>(t) * row + i] +=
                  gs[static_cast<std::size_t>(t) * head_dim + i];
            }
          }
        }
      }
    };
  }
  return out;
}

Tensor merge_heads(const Tensor& x) {
  if (x.ndim() != 4) {
    throw std::invalid_argument("merge_heads: expected (B,H,N,dh), got " + shape_str(x.shape()));
  }
  const int batch = x.dim(0), heads = x.dim(1), n = x.dim(2), head_dim = x.dim(3);
  const int d = heads * head_dim;
  Tensor out = make_out({batch, n, d}, {x});
  for (int b = 0; b < batch; ++b) {
    for (int h = 0; h < heads; ++h) {
      const float* src = x.data().data() +
                         ((static_cast<std::size_t>(b) * heads + h) * n) * head_dim;
      float* dst = out.data().data() + static_cast<std::size_t>(b) * n * d +
                   static_cast<std::size_t>(h) * head_dim;
      for (int t = 0; t < n; ++t) {
        std::memcpy(dst + static_cast<std::size_t>(t) * d,
                    src + static_cast<std::size_t>(t) * head_dim,
                    sizeof(float) * static_cast<std::size_t>(head_dim));
      }
    }
  }
  if (recording(out)) {
    out.node()->backward_fn = [batch, heads, n, head_dim, d](TensorNode& nd) {
      if (!parent(nd, 0).requires_grad) return;
      float* pg = parent_grad(nd, 0).data();
      const float* g = nd.grad.data();
      for (int b = 0; b < batch; ++b) {
        for (int h = 0; h < heads; ++h) {
          float* dst = pg + ((static_cast<std::size_t>(b) * heads + h) * n) * head_dim;
          const float* gs = g + static_cast<std::size_t>(b) * n * d +
                            static_cast<std::size_t>(h) * head_dim;
          for (int t = 0; t < n; ++t) {
            for (int i = 0; i < head_dim; ++i) {
              dst[static_cast<std::size_t>(t) * head_dim + i] +=
                  gs[static_cast<std::size_t>(t) * d + i];
            }
          }
        }
      }
    };
  }
  return out;
}

Tensor sum(const Tensor& x) {
  Tensor out = make_out({1}, {x});
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  out.data()[0] = static_cast<float>(acc);
  if (recording(out)) {
    out.node()->backward_fn = [](TensorNode& nd) {
      if (!parent(nd, 0).requires_grad) return;
      float* pg = parent_grad(nd, 0).data();
      const float g = nd.grad[0];
      const std::size_t m = parent(nd, 0).numel();
      for (std::size_t i = 0; i < m; ++i) pg[i] += g;
    };
  }
  return out;
}

Tensor mean(const Tensor& x) {
  Tensor out = make_out({1}, {x});
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  out.data()[0] = static_cast<float>(acc / static_cast<double>(x.numel()));
  if (recording(out)) {
    out.node()->backward_fn = [](TensorNode& nd) {
      if (!parent(nd, 0).requires_grad) return;
      float* pg = parent_grad(nd, 0).data();
      const std::size_t m = parent(nd, 0).numel();
      const float g = nd.grad[0] / static_cast<float>(m);
      for (std::size_t i = 0; i < m; ++i) pg[i] += g;
    };
  }
  return out;
}

Tensor softmax_lastdim(const Tensor& x) {
  const int c = last_dim(x);
  const std::size_t rows = x.numel() / static_cast<std::size_t>(c);
  Tensor out = make_out(x.shape(), {x});
  for (std::size_t r = 0; r < rows; ++r) {
    CArrMap px(x.data().data() + r * c, c);
    ArrMap po(out.data().data() + r * c, c);
    po = (px - px.maxCoeff()).exp();
    po *= 1.0f / po.sum();
  }
  if (recording(out)) {
    out.node()->backward_fn = [rows, c](TensorNode& nd) {
      if (!parent(nd, 0).requires_grad) return;
      for (std::size_t r = 0; r < rows; ++r) {
        ArrMap pg(parent_grad(nd, 0).data() + r * c, c);
        CArrMap g(nd.grad.data() + r * c, c);
        CArrMap y(nd.value.data() + r * c, c);
        pg += y * (g - (g * y).sum());
      }
    };
  }
  return out;
}

Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
  const int c = last_dim(x);
  if (gamma.ndim() != 1 || gamma.dim(0) != c || beta.ndim() != 1 || beta.dim(0) != c) {
    throw std::invalid_argument("layernorm: affine shapes " + shape_str(gamma.shape()) + "/" +
                                shape_str(beta.shape()) + " do not match last dim of " +
                                shape_str(x.shape()));
  }
  const std::size_t rows = x.numel() / static_cast<std::size_t>(c);
  Tensor out = make_out(x.shape(), {x, gamma, beta});
  std::vector<float> xhat(x.numel());
  std::vector<float> inv_std(rows);
  {
    CArrMap vgamma(gamma.data().data(), c);
    CArrMap vbeta(beta.data().data(), c);
    for (std::size_t r = 0; r < rows; ++r) {
      CArrMap px(x.data().data() + r * c, c);
      ArrMap ph(xhat.data() + r * c, c);
      ArrMap po(out.data().data() + r * c, c);
      const float m = px.mean();
      const float var = (px - m).square().sum() / static_cast<float>(c);
      const float inv = 1.0f / std::sqrt(var + eps);
      inv_std[r] = inv;
      ph = (px - m) * inv;
      po = ph * vgamma + vbeta;
    }
  }
  if (recording(out)) {
    out.node()->backward_fn = [rows, c, xhat = std::move(xhat),
                               inv_std = std::move(inv_std)](TensorNode& nd) {
      CArrMap gam(parent(nd, 1).value.data(), c);
      if (parent(nd, 1).requires_grad) {
        ArrMap pg(parent_grad(nd, 1).data(), c);
        for (std::size_t r = 0; r < rows; ++r) {
          pg += CArrMap(nd.grad.data() + r * c, c) * CArrMap(xhat.data() + r * c, c);
        }
      }
      if (parent(nd, 2).requires_grad) {
        ArrMap pg(parent_grad(nd, 2).data(), c);
        for (std::size_t r = 0; r < rows; ++r) pg += CArrMap(nd.grad.data() + r * c, c);
      }
      if (parent(nd, 0).requires_grad) {
        Eigen::ArrayXf dh(c);
        for (std::size_t r = 0; r < rows; ++r) {
          CArrMap g(nd.grad.data() + r * c, c);
          CArrMap h(xhat.data() + r * c, c);
          ArrMap pg(parent_grad(nd, 0).data() + r * c, c);
          dh = g * gam;
          const float mean_dh = dh.mean();
          const float mean_dh_h = (dh * h).mean();
          pg += inv_std[r] * (dh - mean_dh - h * mean_dh_h);
        }
      }
    };
  }
  return out;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.ndim() != 2) {
    throw std::invalid_argument("cross_entropy: logits must be 2-d, got " +
                                shape_str(logits.shape()));
  }
  const int batch = logits.dim(0), classes = logits.dim(1);
  if (static_cast<int>(labels.size()) != batch) {
    throw std::invalid_argument("cross_entropy: " + std::to_string(labels.size()) +
                                " labels for batch of " + std::to_string(batch));
  }
  std::vector<float> probs(logits.numel());
  double total = 0.0;
  for (int b = 0; b < batch; ++b) {
    const int lbl = labels[static_cast<std::size_t>(b)];
    if (lbl < 0 || lbl >= classes) {
      throw std::invalid_argument("cross_entropy: label " + std::to_string(lbl) +
                                  " out of range [0," + std::to_string(classes) + ")");
    }
    const float* px = logits.data().data() + static_cast<std::size_t>(b) * classes;
    float* pp = probs.data() + static_cast<std::size_t>(b) * classes;
    float mx = px[0];
    for (int i = 1; i < classes; ++i) mx = std::max(mx, px[i]);
    double denom = 0.0;
    for (int i = 0; i < classes; ++i) {
      pp[i] = std::exp(px[i] - mx);
      denom += pp[i];
    }
    const float inv = static_cast<float>(1.0 / denom);
    for (int i = 0; i < classes; ++i) pp[i] *= inv;
    total += -(static_cast<double>(px[lbl]) - mx - std::log(denom));
  }
  Tensor out = make_out({1}, {logits});
  out.data()[0] = static_cast<float>(total / batch);
  if (recording(out)) {
    out.node()->backward_fn = [batch, classes, labels, probs = std::move(probs)](TensorNode& nd) {
      if (!parent(nd, 0).requires_grad) return;
      float* pg = parent_grad(nd, 0).data();
      const float g = nd.grad[0] / static_cast<float>(batch);
      for (int b = 0; b < batch; ++b) {
        const float* pp = probs.data() + static_cast<std::size_t>(b) * classes;
        float* pgb = pg + static_cast<std::size_t>(b) * classes;
        const int lbl = labels[static_cast<std::size_t>(b)];
        for (int i = 0; i < classes; ++i) {
          pgb[i] += g * (pp[i] - (i == lbl ? 1.0f : 0.0f));
        }
      }
    };
  }
  return out;
}

Tensor prepend_token(const Tensor& tokens, const Tensor& cls) {
  if (tokens.ndim() != 3 || cls.ndim() != 1 || cls.dim(0) != tokens.dim(2)) {
    throw std::invalid_argument("prepend_token: shapes " + shape_str(tokens.shape()) + " and " +
                                shape_str(cls.shape()) + " are incompatible");
  }
  const int batch = tokens.dim(0), n = tokens.dim(1), d = tokens.dim(2);
  Tensor out = make_out({batch, n + 1, d}, {tokens, cls});
  for (int b = 0; b < batch; ++b) {
    float* po = out.data().data() + static_cast<std::size_t>(b) * (n + 1) * d;
    std::memcpy(po, cls.data().data(), sizeof(float) * static_cast<std::size_t>(d));
    std::memcpy(po + d, tokens.data().data() + static_cast<std::size_t>(b) * n * d,
                sizeof(float) * static_cast<std::size_t>(n) * d);
  }
  if (recording(out)) {
    out.node()->backward_fn = [batch, n, d](TensorNode& nd) {
      const float* g = nd.grad.data();
      if (parent(nd, 0).requires_grad) {
        float* pg = parent_grad(nd, 0).data();
        for (int b = 0; b < batch; ++b) {
          const float* gb = g + static_cast<std::size_t>(b) * (n + 1) * d + d;
          float* pb = pg + static_cast<std::size_t>(b) * n * d;
          for (std::size_t i = 0; i < static_cast<std::size_t>(n) * d; ++i) pb[i] += gb[i];
        }
      }
      if (parent(nd, 1).requires_grad) {
        float* pg = parent_grad(nd, 1).data();
        for (int b = 0; b < batch; ++b) {
          const float* gb = g + static_cast<std::size_t>(b) * (n + 1) * d;
          for (int i = 0; i < d; ++i) pg[i] += gb[i];
        }
      }
    };
  }
  return out;
}

Tensor select_token(const Tensor& x, int index) {
  if (x.ndim() != 3 || index < 0 || index >= x.dim(1)) {
    throw std::invalid_argument("select_token: index " + std::to_string(index) +
                                " out of range for " + shape_str(x.shape()));
  }
  const int batch = x.dim(0), n = x.dim(1), d = x.dim(2);
  Tensor out = make_out({batch, d}, {x});
  for (int b = 0; b < batch; ++b) {
    std::memcpy(out.data().data() + static_cast<std::size_t>(b) * d,
                x.data().data() + (static_cast<std::size_t>(b) * n + index) * d,
                sizeof(float) * static_cast<std::size_t>(d));
  }
  if (recording(out)) {
    out.node()->backward_fn = [batch, n, d, index](TensorNode& nd) {
      if (!parent(nd, 0).requires_grad) return;
      float* pg = parent_grad(nd, 0).data();
      const float* g = nd.grad.data();
      for (int b = 0; b < batch; ++b) {
        float* pb = pg + (static_cast<std::size_t>(b) * n + index) * d;
        const float* gb = g + static_cast<std::size_t>(b) * d;
        for (int i = 0; i < d; ++i) pb[i] += gb[i];
      }
    };
  }
  return out;
}

Tensor patchify(const Tensor& images, int patch) {
  if (images.ndim() != 4 || images.dim(1) != images.dim(2)) {
    throw std::invalid_argument("patchify: expected square (B,S,S,C) images, got " +
                                shape_str(images.shape()));
  }
  const int batch = images.dim(0), side = images.dim(1), ch = images.dim(3);
  if (patch <= 0 || side % patch != 0) {
    throw std::invalid_argument("patchify: side " + std::to_string(side) +
                                " not divisible by patch " + std::to_string(patch));
  }
  const int n = side / patch;
  const int token_dim = patch * patch * ch;
  Tensor out = make_out({batch, n * n, token_dim}, {images});
  const int row_bytes = patch * ch;
  for (int b = 0; b < batch; ++b) {
    const float* img = images.data().data() + static_cast<std::size_t>(b) * side * side * ch;
    float* po = out.data().data() + static_cast<std::size_t>(b) * n * n * token_dim;
    for (int gy = 0; gy < n; ++gy) {
      for (int gx = 0; gx < n; ++gx) {
        float* tok = po + (static_cast<std::size_t>(gy) * n + gx) * token_dim;
        for (int py = 0; py < patch; ++py) {
          const float* src = img + ((static_cast<std::size_t>(gy) * patch + py) * side +
                                    static_cast<std::size_t>(gx) * patch) * ch;
          std::memcpy(tok + static_cast<std::size_t>(py) * row_bytes, src,
                      sizeof(float) * static_cast<std::size_t>(row_bytes));
        }
      }
    }
  }
  if (recording(out)) {
    out.node()->backward_fn = [batch, side, ch, patch, n, token_dim, row_bytes](TensorNode& nd) {
      if (!parent(nd, 0).requires_grad) return;
      float* pg = parent_grad(nd, 0).data();
      const float* g = nd.grad.data();
      for (int b = 0; b < batch; ++b) {
        float* img = pg + static_cast<std::size_t>(b) * side * side * ch;
        const float* go = g + static_cast<std::size_t>(b) * n * n * token_dim;
        for (int gy = 0; gy < n; ++gy) {
          for (int gx = 0; gx < n; ++gx) {
            const float* tok = go + (static_cast<std::size_t>(gy) * n + gx) * token_dim;
            for (int py = 0; py < patch; ++py) {
              float* dst = img + ((static_cast<std::size_t>(gy) * patch + py) * side +
                                  static_cast<std::size_t>(gx) * patch) * ch;
              const float* src = tok + static_cast<std::size_t>(py) * row_bytes;
              for (int i = 0; i < row_bytes; ++i) dst[i] += src[i];
            }
          }
        }
      }
    };
  }
  return out;
}

namespace {

struct Axis {
  std::vector<int> lo, hi;
  std::vector<float> w;
};

// Align-corners source coordinates for resampling `in` samples to `out`.
Axis make_axis(int in, int out) {
  Axis ax;
  ax.lo.resize(static_cast<std::size_t>(out));
  ax.hi.resize(static_cast<std::size_t>(out));
  ax.w.resize(static_cast<std::size_t>(out));
  for (int j = 0; j < out; ++j) {
    double f = (out > 1) ? static_cast<double>(j) * (in - 1) / (out - 1) : 0.0;
    int lo = static_cast<int>(f);
    if (lo > in - 1) lo = in - 1;
    int hi = std::min(lo + 1, in - 1);
    ax.lo[static_cast<std::size_t>(j)] = lo;
    ax.hi[static_cast<std::size_t>(j)] = hi;
    ax.w[static_cast<std::size_t>(j)] = static_cast<float>(f - lo);
  }
  return ax;
}

}  // namespace

Tensor resize_bilinear(const Tensor& images, int out_h, int out_w) {
  if (images.ndim() != 4) {
    throw std::invalid_argument("resize_bilinear: expected (B,H,W,C), got " +
                                shape_str(images.shape()));
  }
  if (out_h < 1 || out_w < 1) {
    throw std::invalid_argument("resize_bilinear: target size must be positive");
  }
  const int batch = images.dim(0), h = images.dim(1), w = images.dim(2), ch = images.dim(3);
  const Axis ay = make_axis(h, out_h);
  const Axis axx = make_axis(w, out_w);
  Tensor out = make_out({batch, out_h, out_w, ch}, {images});
  for (int b = 0; b < batch; ++b) {
    const float* img = images.data().data() + static_cast<std::size_t>(b) * h * w * ch;
    float* po = out.data().data() + static_cast<std::size_t>(b) * out_h * out_w * ch;
    for (int y = 0; y < out_h; ++y) {
      const float wy = ay.w[static_cast<std::size_t>(y)];
      const float* r0 = img + static_cast<std::size_t>(ay.lo[static_cast<std::size_t>(y)]) * w * ch;
      const float* r1 = img + static_cast<std::size_t>(ay.hi[static_cast<std::size_t>(y)]) * w * ch;
      for (int x = 0; x < out_w; ++x) {
        const float wx = axx.w[static_cast<std::size_t>(x)];
        const float* p00 = r0 + static_cast<std::size_t>(axx.lo[static_cast<std::size_t>(x)]) * ch;
        const float* p01 = r0 + static_cast<std::size_t>(axx.hi[static_cast<std::size_t>(x)]) * ch;
        const float* p10 = r1 + static_cast<std::size_t>(axx.lo[static_cast<std::size_t>(x)]) * ch;
        const float* p11 = r1 + static_cast<std::size_t>(axx.hi[static_cast<std::size_t>(x)]) * ch;
        float* pd = po + (static_cast<std::size_t>(y) * out_w + x) * ch;
        for (int ci = 0; ci < ch; ++ci) {
          const float top = p00[ci] + wx * (p01[ci] - p00[ci]);
          const float bot = p10[ci] + wx * (p11[ci] - p10[ci]);
          pd[ci] = top + wy * (bot - top);
        }
      }
    }
  }
  if (recording(out)) {
    out.node()->backward_fn = [batch, h, w, ch, out_h, out_w, ay, axx](TensorNode& nd) {
      if (!parent(nd, 0).requires_grad) return;
      float* pg = parent_grad(nd, 0).data();
      const float* g = nd.grad.data();
      for (int b = 0; b < batch; ++b) {
        float* img = pg + static_cast<std::size_t>(b) * h * w * ch;
        const float* go = g + static_cast<std::size_t>(b) * out_h * out_w * ch;
        for (int y = 0; y < out_h; ++y) {
          const float wy = ay.w[static_cast<std::size_t>(y)];
          const int y0 = ay.lo[static_cast<std::size_t>(y)], y1 = ay.hi[static_cast<std::size_t>(y)];
          for (int x = 0; x < out_w; ++x) {
            const float wx = axx.w[static_cast<std::size_t>(x)];
            const int x0 = axx.lo[static_cast<std::size_t>(x)], x1 = axx.hi[static_cast<std::size_t>(x)];
            const float* gs = go + (static_cast<std::size_t>(y) * out_w + x) * ch;
            for (int ci = 0; ci < ch; ++ci) {
              const float gv = gs[ci];
              img[(static_cast<std::size_t>(y0) * w + x0) * ch + ci] += (1 - wy) * (1 - wx) * gv;
              img[(static_cast<std::size_t>(y0) * w + x1) * ch + ci] += (1 - wy) * wx * gv;
              img[(static_cast<std::size_t>(y1) * w + x0) * ch + ci] += wy * (1 - wx) * gv;
              img[(static_cast<std::size_t>(y1) * w + x1) * ch + ci] += wy * wx * gv;
            }
          }
        }
      }
    };
  }
  return out;
}

Tensor interpolate_pos_encoding(const Tensor& pe, int src_grid, int dst_grid) {
  if (pe.ndim() != 2 || src_grid < 1 || pe.dim(0) != 1 + src_grid * src_grid) {
    throw std::invalid_argument("interpolate_pos_encoding: " + shape_str(pe.shape()) +
                                " is not a class token plus a " + std::to_string(src_grid) + "x" +
                                std::to_string(src_grid) + " grid");
  }
  if (dst_grid < 1) {
    throw std::invalid_argument("interpolate_pos_encoding: target grid must be positive");
  }
  const int d = pe.dim(1);
  const Axis ax = make_axis(src_grid, dst_grid);
  Tensor out = make_out({1 + dst_grid * dst_grid, d}, {pe});
  std::memcpy(out.data().data(), pe.data().data(), sizeof(float) * static_cast<std::size_t>(d));
  const float* grid = pe.data().data() + d;
  float* pog = out.data().data() + d;
  for (int y = 0; y < dst_grid; ++y) {
    const float wy = ax.w[static_cast<std::size_t>(y)];
    const int y0 = ax.lo[static_cast<std::size_t>(y)], y1 = ax.hi[static_cast<std::size_t>(y)];
    for (int x = 0; x < dst_grid; ++x) {
      const float wx = ax.w[static_cast<std::size_t>(x)];
      const int x0 = ax.lo[static_cast<std::size_t>(x)], x1 = ax.hi[static_cast<std::size_t>(x)];
      const float* p00 = grid + (static_cast<std::size_t>(y0) * src_grid + x0) * d;
      const float* p01 = grid + (static_cast<std::size_t>(y0) * src_grid + x1) * d;
      const float* p10 = grid + (static_cast<std::size_t>(y1) * src_grid + x0) * d;
      const float* p11 = grid + (static_cast<std::size_t>(y1) * src_grid + x1) * d;
      float* pd = pog + (static_cast<std::size_t>(y) * dst_grid + x) * d;
      for (int i = 0; i < d; ++i) {
        const float top = p00[i] + wx * (p01[i] - p00[i]);
        const float bot = p10[i] + wx * (p11[i] - p10[i]);
        pd[i] = top + wy * (bot - top);
      }
    }
  }
  if (recording(out)) {
    out.node()->backward_fn = [src_grid, dst_grid, d, ax](TensorNode& nd) {
      if (!parent(nd, 0).requires_grad) return;
      float* pg = parent_grad(nd, 0).data();
      const float* g = nd.grad.data();
      for (int i = 0; i < d; ++i) pg[i] += g[i];
      float* grid_g = pg + d;
      const float* go = g + d;
      for (int y = 0; y < dst_grid; ++y) {
        const float wy = ax.w[static_cast<std::size_t>(y)];
        const int y0 = ax.lo[static_cast<std::size_t>(y)], y1 = ax.hi[static_cast<std::size_t>(y)];
        for (int x = 0; x < dst_grid; ++x) {
          const float wx = ax.w[static_cast<std::size_t>(x)];
          const int x0 = ax.lo[static_cast<std::size_t>(x)], x1 = ax.hi[static_cast<std::size_t>(x)];
          const float* gs = go + (static_cast<std::size_t>(y) * dst_grid + x) * d;
          for (int i = 0; i < d; ++i) {
            const float gv = gs[i];
            grid_g[(static_cast<std::size_t>(y0) * src_grid + x0) * d + i] += (1 - wy) * (1 - wx) * gv;
            grid_g[(static_cast<std::size_t>(y0) * src_grid + x1) * d + i] += (1 - wy) * wx * gv;
            grid_g[(static_cast<std::size_t>(y1) * src_grid + x0) * d + i] += wy * (1 - wx) * gv;
            grid_g[(static_cast<std::size_t>(y1) * src_grid + x1) * d + i] += wy * wx * gv;
          }
        }
      }
    };
  }
  return out;
}

}  // namespace autoprog::ops
