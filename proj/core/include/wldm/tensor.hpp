#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "wldm/common.hpp"

namespace wldm {

class Tensor;

/// A node in the eagerly-built computation graph. Data is float32, row-major.
/// The gradient buffer is allocated lazily on first accumulation and is the
/// same length as data. backward_fn reads this node's grad and accumulates
/// (adds) into the parents' grads; it must never overwrite them, so repeated
/// backward passes accumulate until the caller zeroes gradients.
struct TensorNode {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void()> backward_fn;
  const char* op_name = "leaf";

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0f);
  }
};

/// Thin shared handle to a TensorNode. Copies alias the same storage.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, float value, bool requires_grad = false);
  static Tensor from_data(const Shape& shape, std::vector<float> data, bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t dim(int i) const {
    int n = static_cast<int>(node_->shape.size());
    if (i < 0) i += n;
    return node_->shape[static_cast<size_t>(i)];
  }
  int ndim() const { return static_cast<int>(node_->shape.size()); }
  int64_t numel() const { return node_->numel(); }

  std::vector<float>& data() { return node_->data; }
  const std::vector<float>& data() const { return node_->data; }
  std::vector<float>& grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  bool has_grad() const { return !node_->grad.empty(); }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  const char* op_name() const { return node_->op_name; }

  float item() const {
    WLDM_CHECK(numel() == 1, "item() on non-scalar tensor " + shape_str(shape()));
    return node_->data[0];
  }

  std::shared_ptr<TensorNode> node() const { return node_; }
  TensorNode* raw() const { return node_.get(); }

  /// Runs reverse-mode autodiff from this tensor. Scalar roots are seeded
  /// with 1; non-scalar roots require an explicit seed.
  void backward() const;
  void backward(const std::vector<float>& seed) const;

  /// Clears this tensor's gradient buffer (keeps it allocated).
  void zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0f);
  }

  /// Returns a new leaf with copied data and no graph history.
  Tensor detach() const;

 private:
  std::shared_ptr<TensorNode> node_;
};

/// Reverse-topological replay order for the graph reachable from a root,
/// built by iterative depth-first search when backward() is called. Replaying
/// nodes in reverse order guarantees each node's grad is complete before its
/// backward_fn runs.
class Tape {
 public:
  explicit Tape(const Tensor& root);

  /// Seeds the root gradient and replays every recorded backward_fn.
  void run(const std::vector<float>& seed);

  const std::vector<TensorNode*>& nodes() const { return order_; }

 private:
  Tensor root_;
  std::vector<TensorNode*> order_;  // topological: parents before consumers
};

/// While alive, newly created ops record no parents and no backward_fn, so
/// the graph is not extended. Nestable.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

}  // namespace wldm
