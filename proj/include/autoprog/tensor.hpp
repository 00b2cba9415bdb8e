// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace autoprog {

namespace detail {

struct TensorNode {
  std::vector<int> shape;
  std::vector<float> value;
  // Empty until a gradient has been accumulated; "absent" is observable state.
  std::vector<float> grad;
  bool has_grad = false;
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Pulls this node's grad into the parents' grads. Null for leaves.
  std::function<void(TensorNode&)> backward_fn;

  std::size_t numel() const { return value.size(); }
};

}  // namespace detail

// Shared handle to an fp32 tensor participating in the computation graph.
// Copying a Tensor copies the handle, not the storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, float fill, bool requires_grad = false);
  static Tensor from_data(std::vector<int> shape, std::vector<float> data,
                          bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  int dim(int i) const { return node_->shape[static_cast<std::size_t>(i)]; }
  int ndim() const { return static_cast<int>(node_->shape.size()); }
  std::size_t numel() const { return node_->value.size(); }

  std::vector<float>& data() { return node_->value; }
  const std::vector<float>& data() const { return node_->value; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool b) { node_->requires_grad = b; }

  bool has_grad() const { return node_->has_grad; }
  std::vector<float>& grad();
  const std::vector<float>& grad() const;
  // Allocates a zero gradient buffer if absent.
  std::vector<float>& ensure_grad();
  // Releases the gradient buffer; grad is absent afterwards.
  void zero_grad();

  // Value of a one-element tensor.
  float item() const;

  // Deep value copy with no graph history. The copy is a leaf.
  Tensor clone(bool requires_grad = false) const;

  std::shared_ptr<detail::TensorNode>& node() { return node_; }
  const std::shared_ptr<detail::TensorNode>& node() const { return node_; }

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

// Reverse-mode pass from a scalar loss. Gradients accumulate into every
// grad-requiring tensor reachable from the loss; repeated calls without
// zeroing accumulate further.
void backward(const Tensor& loss);

// While any NoGradGuard is alive, ops do not record the graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

std::string shape_str(const std::vector<int>& shape);
std::size_t shape_numel(const std::vector<int>& shape);

}  // namespace autoprog
