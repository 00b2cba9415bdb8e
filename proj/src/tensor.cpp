// SPDX-License-Identifier: Apache-2.0
#include "autoprog/tensor.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace autoprog {

namespace {
thread_local int no_grad_depth = 0;
}

NoGradGuard::NoGradGuard() { ++no_grad_depth; }
NoGradGuard::~NoGradGuard() { --no_grad_depth; }
bool grad_enabled() { return no_grad_depth == 0; }

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  s += ")";
  return s;
}

std::size_t shape_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor shape has non-positive dimension " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return full(std::move(shape), 0.0f, requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, float fill, bool requires_grad) {
  Tensor t;
  t.node_ = std::make_shared<detail::TensorNode>();
  t.node_->value.assign(shape_numel(shape), fill);
  t.node_->shape = std::move(shape);
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<float> data, bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw std::invalid_argument("Tensor::from_data: " + std::to_string(data.size()) +
                                " values do not fill shape " + shape_str(shape));
  }
  Tensor t;
  t.node_ = std::make_shared<detail::TensorNode>();
  t.node_->shape = std::move(shape);
  t.node_->value = std::move(data);
  t.node_->requires_grad = requires_grad;
  return t;
}

std::vector<float>& Tensor::grad() {
  if (!node_->has_grad) throw std::runtime_error("Tensor::grad: gradient is absent");
  return node_->grad;
}

const std::vector<float>& Tensor::grad() const {
  if (!node_->has_grad) throw std::runtime_error("Tensor::grad: gradient is absent");
  return node_->grad;
}

std::vector<float>& Tensor::ensure_grad() {
  if (!node_->has_grad) {
    node_->grad.assign(node_->value.size(), 0.0f);
    node_->has_grad = true;
  }
  return node_->grad;
}

void Tensor::zero_grad() {
  node_->grad.clear();
  node_->grad.shrink_to_fit();
  node_->has_grad = false;
}

float Tensor::item() const {
  if (numel() != 1) throw std::runtime_error("Tensor::item: tensor has " + std::to_string(numel()) + " elements");
  return node_->value[0];
}

Tensor Tensor::clone(bool requires_grad) const {
  Tensor t;
  t.node_ = std::make_shared<detail::TensorNode>();
  t.node_->shape = node_->shape;
  t.node_->value = node_->value;
  t.node_->requires_grad = requires_grad;
  return t;
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw std::runtime_error("backward: undefined tensor");
  if (loss.numel() != 1) {
    throw std::runtime_error("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  }

  // Iterative post-order DFS; prunes branches that cannot reach a
  // grad-requiring leaf.
  std::vector<detail::TensorNode*> order;
  std::unordered_set<detail::TensorNode*> visited;
  struct Frame {
    detail::TensorNode* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  detail::TensorNode* root = loss.node().get();
  if (!root->requires_grad) return;
  stack.push_back({root, 0});
  visited.insert(root);
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      detail::TensorNode* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  // Interior (op-output) gradients are scratch for this pass; only leaf
  // gradients persist and accumulate across calls.
  for (detail::TensorNode* n : order) {
    if (n->backward_fn) {
      n->grad.assign(n->value.size(), 0.0f);
      n->has_grad = true;
    }
  }

  if (!root->has_grad) {
    root->grad.assign(1, 0.0f);
    root->has_grad = true;
  }
  root->grad[0] += 1.0f;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::TensorNode* n = *it;
    if (n->backward_fn && n->has_grad) n->backward_fn(*n);
  }
}

}  // namespace autoprog
