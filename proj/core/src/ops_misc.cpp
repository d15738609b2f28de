#include <cmath>
#include <vector>

#include "op_helpers.hpp"
#include "wldm/ops.hpp"

namespace wldm::ops {

namespace {
using detail::finalize;
using detail::make_node;
}  // namespace

// Rotary position encoding. x is (..., L, C) with C even; channel pair
// (2i, 2i+1) at sequence index l rotates by positions[l] * base^(-2i/C).
// Backward is the rotation by the negated angle (the transpose).
Tensor rope_rotate(const Tensor& x, const std::vector<float>& positions, float base) {
  int nd = x.ndim();
  WLDM_CHECK(nd >= 2, "rope_rotate expects (..., L, C)");
  int64_t C = x.dim(nd - 1);
  int64_t L = x.dim(nd - 2);
  WLDM_CHECK(C % 2 == 0, "rope_rotate channel count must be even");
  WLDM_CHECK(static_cast<int64_t>(positions.size()) == L, "rope_rotate position count mismatch");
  int64_t half = C / 2;
  int64_t rows = x.numel() / (L * C);

  // Angle table in double, shared by forward and backward.
  auto cos_t = std::make_shared<std::vector<float>>(static_cast<size_t>(L * half));
  auto sin_t = std::make_shared<std::vector<float>>(static_cast<size_t>(L * half));
  for (int64_t l = 0; l < L; ++l) {
    for (int64_t i = 0; i < half; ++i) {
      double expo = -2.0 * static_cast<double>(i) / static_cast<double>(C);
      double theta = static_cast<double>(positions[static_cast<size_t>(l)]) *
                     std::pow(static_cast<double>(base), expo);
      (*cos_t)[static_cast<size_t>(l * half + i)] = static_cast<float>(std::cos(theta));
      (*sin_t)[static_cast<size_t>(l * half + i)] = static_cast<float>(std::sin(theta));
    }
  }

  Tensor out = make_node(x.shape(), {x}, "rope_rotate");
  const float* px = x.data().data();
  float* po = out.data().data();
  parallel_for_rows(rows * L, [&](int64_t lo, int64_t hi) {
    for (int64_t rl = lo; rl < hi; ++rl) {
      int64_t l = rl % L;
      const float* xr = px + rl * C;
      float* orow = po + rl * C;
      const float* cr = cos_t->data() + l * half;
      const float* sr = sin_t->data() + l * half;
      for (int64_t i = 0; i < half; ++i) {
        float a = xr[2 * i], b = xr[2 * i + 1];
        orow[2 * i] = a * cr[i] - b * sr[i];
        orow[2 * i + 1] = a * sr[i] + b * cr[i];
      }
    }
  });

  if (out.requires_grad()) {
    TensorNode* on = out.raw();
    Tensor tx = x;
    out.node()->backward_fn = [on, tx, cos_t, sin_t, rows, L, C, half]() mutable {
      const float* g = on->grad.data();
      float* gx = tx.grad().data();
      parallel_for_rows(rows * L, [&](int64_t lo, int64_t hi) {
        for (int64_t rl = lo; rl < hi; ++rl) {
          int64_t l = rl % L;
          const float* gr = g + rl * C;
          float* gxr = gx + rl * C;
          const float* cr = cos_t->data() + l * half;
          const float* sr = sin_t->data() + l * half;
          for (int64_t i = 0; i < half; ++i) {
            float ga = gr[2 * i], gb = gr[2 * i + 1];
            gxr[2 * i] += ga * cr[i] + gb * sr[i];
            gxr[2 * i + 1] += -ga * sr[i] + gb * cr[i];
          }
        }
      });
    };
  }
  finalize(out);
  return out;
}

}  // namespace wldm::ops
