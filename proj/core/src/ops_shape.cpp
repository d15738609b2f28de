#include <algorithm>

#include "op_helpers.hpp"
#include "wldm/ops.hpp"

namespace wldm::ops {

namespace {
using detail::finalize;
using detail::make_node;

// Splits shape around `axis` into (outer, axis extent, inner).
void split_axis(const Shape& s, int axis, int64_t& outer, int64_t& axis_n, int64_t& inner) {
  outer = 1;
  inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[static_cast<size_t>(i)];
  axis_n = s[static_cast<size_t>(axis)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) inner *= s[i];
}

int norm_axis(int axis, int ndim) {
  if (axis < 0) axis += ndim;
  WLDM_CHECK(axis >= 0 && axis < ndim, "axis out of range");
  return axis;
}

}  // namespace

Tensor reshape(const Tensor& a, const Shape& shape) {
  WLDM_CHECK(numel(shape) == a.numel(),
             "reshape " + shape_str(a.shape()) + " -> " + shape_str(shape) + " changes element count");
  Tensor out = make_node(shape, {a}, "reshape");
  out.data() = a.data();
  if (out.requires_grad()) {
    TensorNode* on = out.raw();
    Tensor ta = a;
    out.node()->backward_fn = [on, ta]() mutable {
      const float* g = on->grad.data();
      float* ga = ta.grad().data();
      parallel_for(on->numel(), [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) ga[i] += g[i];
      });
    };
  }
  finalize(out);
  return out;
}

Tensor narrow(const Tensor& a, int axis, int64_t start, int64_t length) {
  axis = norm_axis(axis, a.ndim());
  int64_t outer, axis_n, inner;
  split_axis(a.shape(), axis, outer, axis_n, inner);
  WLDM_CHECK(start >= 0 && length >= 0 && start + length <= axis_n, "narrow range out of bounds");
  Shape oshape = a.shape();
  oshape[static_cast<size_t>(axis)] = length;
  Tensor out = make_node(oshape, {a}, "narrow");
  const float* pa = a.data().data();
  float* po = out.data().data();
  parallel_for(outer * length, [&](int64_t lo, int64_t hi) {
    for (int64_t r = lo; r < hi; ++r) {
      int64_t o = r / length;
      int64_t j = r % length;
      const float* src = pa + (o * axis_n + start + j) * inner;
      float* dst = po + r * inner;
      std::copy(src, src + inner, dst);
    }
  });
  if (out.requires_grad()) {
    TensorNode* on = out.raw();
    Tensor ta = a;
    out.node()->backward_fn = [on, ta, outer, axis_n, inner, start, length]() mutable {
      const float* g = on->grad.data();
      float* ga = ta.grad().data();
      parallel_for(outer * length, [&](int64_t lo, int64_t hi) {
        for (int64_t r = lo; r < hi; ++r) {
          int64_t o = r / length;
          int64_t j = r % length;
          float* dst = ga + (o * axis_n + start + j) * inner;
          const float* src = g + r * inner;
          for (int64_t i = 0; i < inner; ++i) dst[i] += src[i];
        }
      });
    };
  }
  finalize(out);
  return out;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  WLDM_CHECK(!parts.empty(), "concat of zero tensors");
  axis = norm_axis(axis, parts[0].ndim());
  Shape oshape = parts[0].shape();
  int64_t total = 0;
  for (const auto& p : parts) {
    WLDM_CHECK(p.ndim() == parts[0].ndim(), "concat rank mismatch");
    for (int i = 0; i < p.ndim(); ++i) {
      if (i != axis) {
        WLDM_CHECK(p.dim(i) == parts[0].dim(i), "concat non-axis dim mismatch");
      }
    }
    total += p.dim(axis);
  }
  oshape[static_cast<size_t>(axis)] = total;

  std::vector<Tensor> parents(parts.begin(), parts.end());
  Tensor out = make_node(oshape, parents, "concat");
  int64_t outer, axis_n, inner;
  split_axis(oshape, axis, outer, axis_n, inner);
  float* po = out.data().data();
  int64_t offset = 0;
  for (const auto& p : parts) {
    int64_t pl = p.dim(axis);
    const float* pp = p.data().data();
    parallel_for(outer * pl, [&](int64_t lo, int64_t hi) {
      for (int64_t r = lo; r < hi; ++r) {
        int64_t o = r / pl;
        int64_t j = r % pl;
        const float* src = pp + r * inner;
        float* dst = po + (o * axis_n + offset + j) * inner;
        std::copy(src, src + inner, dst);
      }
    });
    offset += pl;
  }
  if (out.requires_grad()) {
    TensorNode* on = out.raw();
    std::vector<Tensor> held(parts.begin(), parts.end());
    out.node()->backward_fn = [on, held, outer, axis_n, inner, axis]() mutable {
      const float* g = on->grad.data();
      int64_t offset2 = 0;
      for (auto& p : held) {
        int64_t pl = p.dim(axis);
        if (p.requires_grad()) {
          float* gp = p.grad().data();
          parallel_for(outer * pl, [&](int64_t lo, int64_t hi) {
            for (int64_t r = lo; r < hi; ++r) {
              int64_t o = r / pl;
              int64_t j = r % pl;
              const float* src = g + (o * axis_n + offset2 + j) * inner;
              float* dst = gp + r * inner;
              for (int64_t i = 0; i < inner; ++i) dst[i] += src[i];
            }
          });
        }
        offset2 += pl;
      }
    };
  }
  finalize(out);
  return out;
}

Tensor permute(const Tensor& a, const std::vector<int>& perm) {
  int nd = a.ndim();
  WLDM_CHECK(static_cast<int>(perm.size()) == nd, "permute rank mismatch");
  Shape oshape(static_cast<size_t>(nd));
  for (int i = 0; i < nd; ++i) oshape[static_cast<size_t>(i)] = a.dim(perm[static_cast<size_t>(i)]);
  Tensor out = make_node(oshape, {a}, "permute");

  // in_stride_for_out[d]: stride in the input of output axis d.
  std::vector<int64_t> in_strides(static_cast<size_t>(nd), 1);
  for (int i = nd - 2; i >= 0; --i) {
    in_strides[static_cast<size_t>(i)] = in_strides[static_cast<size_t>(i) + 1] * a.dim(i + 1);
  }
  std::vector<int64_t> map_strides(static_cast<size_t>(nd));
  for (int i = 0; i < nd; ++i) {
    map_strides[static_cast<size_t>(i)] = in_strides[static_cast<size_t>(perm[static_cast<size_t>(i)])];
  }
  const float* pa = a.data().data();
  float* po = out.data().data();
  auto out_to_in = [&](int64_t oi) {
    int64_t ii = 0;
    for (int d = nd - 1; d >= 0; --d) {
      int64_t coord = oi % oshape[static_cast<size_t>(d)];
      oi /= oshape[static_cast<size_t>(d)];
      ii += coord * map_strides[static_cast<size_t>(d)];
    }
    return ii;
  };
  parallel_for(out.numel(), [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) po[i] = pa[out_to_in(i)];
  });
  if (out.requires_grad()) {
    TensorNode* on = out.raw();
    Tensor ta = a;
    out.node()->backward_fn = [on, ta, oshape, map_strides, nd]() mutable {
      const float* g = on->grad.data();
      float* ga = ta.grad().data();
      auto out_to_in2 = [&](int64_t oi) {
        int64_t ii = 0;
        for (int d = nd - 1; d >= 0; --d) {
          int64_t coord = oi % oshape[static_cast<size_t>(d)];
          oi /= oshape[static_cast<size_t>(d)];
          ii += coord * map_strides[static_cast<size_t>(d)];
        }
        return ii;
      };
      // One-to-one mapping, so parallel writes stay disjoint.
      parallel_for(on->numel(), [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) ga[out_to_in2(i)] += g[i];
      });
    };
  }
  finalize(out);
  return out;
}

Tensor interpolate_nearest2d(const Tensor& a, int64_t out_h, int64_t out_w) {
  int nd = a.ndim();
  WLDM_CHECK(nd >= 2, "interpolate_nearest2d needs at least 2 axes");
  int64_t in_h = a.dim(nd - 2);
  int64_t in_w = a.dim(nd - 1);
  int64_t batch = a.numel() / (in_h * in_w);
  Shape oshape = a.shape();
  oshape[static_cast<size_t>(nd - 2)] = out_h;
  oshape[static_cast<size_t>(nd - 1)] = out_w;
  Tensor out = make_node(oshape, {a}, "interpolate_nearest2d");

  // src = floor(dst * in / out); exact in integer arithmetic.
  std::vector<int64_t> row_map(static_cast<size_t>(out_h)), col_map(static_cast<size_t>(out_w));
  for (int64_t r = 0; r < out_h; ++r) row_map[static_cast<size_t>(r)] = r * in_h / out_h;
  for (int64_t c = 0; c < out_w; ++c) col_map[static_cast<size_t>(c)] = c * in_w / out_w;

  const float* pa = a.data().data();
  float* po = out.data().data();
  parallel_for(batch * out_h * out_w, [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) {
      int64_t c = i % out_w;
      int64_t r = (i / out_w) % out_h;
      int64_t b = i / (out_w * out_h);
      po[i] = pa[(b * in_h + row_map[static_cast<size_t>(r)]) * in_w + col_map[static_cast<size_t>(c)]];
    }
  });
  if (out.requires_grad()) {
    TensorNode* on = out.raw();
    Tensor ta = a;
    out.node()->backward_fn = [on, ta, row_map, col_map, batch, in_h, in_w, out_h, out_w]() mutable {
      const float* g = on->grad.data();
      float* ga = ta.grad().data();
      // Many output cells can map to one input cell; accumulate serially.
      for (int64_t i = 0, n = batch * out_h * out_w; i < n; ++i) {
        int64_t c = i % out_w;
        int64_t r = (i / out_w) % out_h;
        int64_t b = i / (out_w * out_h);
        ga[(b * in_h + row_map[static_cast<size_t>(r)]) * in_w + col_map[static_cast<size_t>(c)]] += g[i];
      }
    };
  }
  finalize(out);
  return out;
}

Tensor drop_path(const Tensor& a, const std::vector<float>& keep_mask, float keep_prob) {
  if (keep_mask.empty()) return a;  // eval mode: identity
  int64_t b_n = a.dim(0);
  WLDM_CHECK(static_cast<int64_t>(keep_mask.size()) == b_n, "drop_path mask length mismatch");
  WLDM_CHECK(keep_prob > 0.0f, "drop_path keep_prob must be positive");
  int64_t per = a.numel() / b_n;
  Tensor out = make_node(a.shape(), {a}, "drop_path");
  const float* pa = a.data().data();
  float* po = out.data().data();
  float inv = 1.0f / keep_prob;
  parallel_for(a.numel(), [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) {
      po[i] = pa[i] * keep_mask[static_cast<size_t>(i / per)] * inv;
    }
  });
  if (out.requires_grad()) {
    TensorNode* on = out.raw();
    Tensor ta = a;
    std::vector<float> mask = keep_mask;
    out.node()->backward_fn = [on, ta, mask, per, inv]() mutable {
      const float* g = on->grad.data();
      float* ga = ta.grad().data();
      parallel_for(on->numel(), [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) {
          ga[i] += g[i] * mask[static_cast<size_t>(i / per)] * inv;
        }
      });
    };
  }
  finalize(out);
  return out;
}

}  // namespace wldm::ops
