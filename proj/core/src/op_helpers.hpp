#pragma once

#include <cmath>
#include <utility>

#include "wldm/tensor.hpp"

namespace wldm::ops::detail {

/// Allocates the output node for an op. Parents are recorded (and the output
/// marked as requiring grad) only when grad mode is on and at least one
/// defined parent requires grad; otherwise the node is a grad-less leaf and
/// the caller must not attach a backward_fn.
inline Tensor make_node(const Shape& shape, std::vector<Tensor> parents, const char* name) {
  auto node = std::make_shared<TensorNode>();
  node->shape = shape;
  node->data.assign(static_cast<size_t>(wldm::numel(shape)), 0.0f);
  node->op_name = name;
  bool rg = false;
  if (grad_enabled()) {
    for (const auto& p : parents) {
      if (p.defined() && p.requires_grad()) {
        rg = true;
        break;
      }
    }
  }
  if (rg) {
    node->requires_grad = true;
    for (auto& p : parents) {
      if (p.defined()) node->parents.push_back(p.node());
    }
  }
  return Tensor(std::move(node));
}

/// Checked-mode guard: scans the freshly computed output for NaN/Inf so a
/// numerical blow-up is reported at the op that produced it.
inline void finalize(const Tensor& t) {
  if (!wldm::checked_mode()) return;
  const auto& d = t.data();
  for (size_t i = 0; i < d.size(); ++i) {
    if (!std::isfinite(d[i])) {
      wldm::fail(std::string("non-finite value in output of op '") + t.op_name() +
                 "' at flat index " + std::to_string(i));
    }
  }
}

}  // namespace wldm::ops::detail
