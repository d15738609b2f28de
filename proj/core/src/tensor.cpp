#include "wldm/tensor.hpp"

#include <algorithm>
#include <unordered_set>

namespace wldm {

namespace {
bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  auto node = std::make_shared<TensorNode>();
  node->shape = shape;
  node->data.assign(static_cast<size_t>(wldm::numel(shape)), 0.0f);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::full(const Shape& shape, float value, bool requires_grad) {
  auto node = std::make_shared<TensorNode>();
  node->shape = shape;
  node->data.assign(static_cast<size_t>(wldm::numel(shape)), value);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from_data(const Shape& shape, std::vector<float> data, bool requires_grad) {
  WLDM_CHECK(static_cast<int64_t>(data.size()) == wldm::numel(shape),
             "from_data: " + std::to_string(data.size()) + " values for shape " + shape_str(shape));
  auto node = std::make_shared<TensorNode>();
  node->shape = shape;
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(float value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::detach() const {
  auto node = std::make_shared<TensorNode>();
  node->shape = node_->shape;
  node->data = node_->data;
  node->requires_grad = false;
  return Tensor(std::move(node));
}

Tape::Tape(const Tensor& root) : root_(root) {
  // Iterative DFS; the explicit stack carries (node, next-parent-index) so
  // deep chains (long training graphs) cannot overflow the call stack.
  std::unordered_set<TensorNode*> visited;
  std::vector<std::pair<TensorNode*, size_t>> stack;
  TensorNode* r = root.raw();
  if (!r->requires_grad) return;
  visited.insert(r);
  stack.emplace_back(r, 0);
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      TensorNode* p = node->parents[idx].get();
      ++idx;
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order_.push_back(node);
      stack.pop_back();
    }
  }
}

void Tape::run(const std::vector<float>& seed) {
  TensorNode* r = root_.raw();
  WLDM_CHECK(seed.size() == r->data.size(), "backward seed size mismatch");
  r->ensure_grad();
  for (size_t i = 0; i < seed.size(); ++i) r->grad[i] += seed[i];
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    TensorNode* node = *it;
    if (node->backward_fn) node->backward_fn();
  }
}

void Tensor::backward() const {
  WLDM_CHECK(numel() == 1, "backward() without a seed requires a scalar, got " + shape_str(shape()));
  backward(std::vector<float>{1.0f});
}

void Tensor::backward(const std::vector<float>& seed) const {
  WLDM_CHECK(node_->requires_grad, "backward() on a tensor that does not require grad");
  Tape tape(*this);
  tape.run(seed);
}

}  // namespace wldm
