#include <cmath>

#include "op_helpers.hpp"
#include "wldm/ops.hpp"

namespace wldm::ops {

namespace {

using detail::finalize;
using detail::make_node;

/// Maps a flat row-major index over the output (= left operand) shape to the
/// flat index of the broadcast right operand. The right operand must have the
/// same rank, with each axis either matching or equal to 1.
struct BcastMap {
  bool identity = true;
  std::vector<int64_t> dims;       // output dims
  std::vector<int64_t> b_strides;  // 0 on broadcast axes

  BcastMap(const Shape& a, const Shape& b) {
    WLDM_CHECK(a.size() == b.size(),
               "binary op rank mismatch: " + shape_str(a) + " vs " + shape_str(b));
    dims = a;
    b_strides.assign(a.size(), 0);
    int64_t stride = 1;
    for (int i = static_cast<int>(a.size()) - 1; i >= 0; --i) {
      WLDM_CHECK(b[i] == a[i] || b[i] == 1,
                 "binary op axis " + std::to_string(i) + " mismatch: " + shape_str(a) +
                     " vs " + shape_str(b));
      if (b[i] == a[i]) {
        b_strides[i] = stride;
      } else {
        identity = false;
        b_strides[i] = 0;
      }
      stride *= b[i];
    }
    if (a != b) identity = false;
  }

  int64_t map(int64_t i) const {
    if (identity) return i;
    int64_t bi = 0;
    for (int d = static_cast<int>(dims.size()) - 1; d >= 0; --d) {
      int64_t coord = i % dims[d];
      i /= dims[d];
      bi += coord * b_strides[d];
    }
    return bi;
  }
};

enum class BinOp { Add, Sub, Mul, Div };

Tensor binary(const Tensor& a, const Tensor& b, BinOp op, const char* name) {
  BcastMap bm(a.shape(), b.shape());
  Tensor out = make_node(a.shape(), {a, b}, name);
  const float* pa = a.data().data();
  const float* pb = b.data().data();
  float* po = out.data().data();
  parallel_for(a.numel(), [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) {
      float bv = pb[bm.map(i)];
      switch (op) {
        case BinOp::Add: po[i] = pa[i] + bv; break;
        case BinOp::Sub: po[i] = pa[i] - bv; break;
        case BinOp::Mul: po[i] = pa[i] * bv; break;
        case BinOp::Div: po[i] = pa[i] / bv; break;
      }
    }
  });
  if (out.requires_grad()) {
    TensorNode* on = out.raw();
    Tensor ta = a, tb = b;
    out.node()->backward_fn = [on, ta, tb, bm, op]() mutable {
      const float* g = on->grad.data();
      int64_t n = on->numel();
      if (ta.requires_grad()) {
        float* ga = ta.grad().data();
        const float* pb2 = tb.data().data();
        parallel_for(n, [&](int64_t lo, int64_t hi) {
          for (int64_t i = lo; i < hi; ++i) {
            switch (op) {
              case BinOp::Add:
              case BinOp::Sub: ga[i] += g[i]; break;
              case BinOp::Mul: ga[i] += g[i] * pb2[bm.map(i)]; break;
              case BinOp::Div: ga[i] += g[i] / pb2[bm.map(i)]; break;
            }
          }
        });
      }
      if (tb.requires_grad()) {
        float* gb = tb.grad().data();
        const float* pa2 = ta.data().data();
        const float* pb2 = tb.data().data();
        if (bm.identity) {
          parallel_for(n, [&](int64_t lo, int64_t hi) {
            for (int64_t i = lo; i < hi; ++i) {
              switch (op) {
                case BinOp::Add: gb[i] += g[i]; break;
                case BinOp::Sub: gb[i] -= g[i]; break;
                case BinOp::Mul: gb[i] += g[i] * pa2[i]; break;
                case BinOp::Div: {
                  float bv = pb2[i];
                  gb[i] -= g[i] * pa2[i] / (bv * bv);
                  break;
                }
              }
            }
          });
        } else {
          // Broadcast axes fold many output elements into one b element;
          // accumulate serially so the order is fixed.
          for (int64_t i = 0; i < n; ++i) {
            int64_t bi = bm.map(i);
            switch (op) {
              case BinOp::Add: gb[bi] += g[i]; break;
              case BinOp::Sub: gb[bi] -= g[i]; break;
              case BinOp::Mul: gb[bi] += g[i] * pa2[i]; break;
              case BinOp::Div: {
                float bv = pb2[bi];
                gb[bi] -= g[i] * pa2[i] / (bv * bv);
                break;
              }
            }
          }
        }
      }
    };
  }
  finalize(out);
  return out;
}

/// Unary op with derivative expressed in terms of input x and output y.
template <typename Fwd, typename Bwd>
Tensor unary(const Tensor& a, const char* name, Fwd fwd, Bwd bwd) {
  Tensor out = make_node(a.shape(), {a}, name);
  const float* pa = a.data().data();
  float* po = out.data().data();
  parallel_for(a.numel(), [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) po[i] = fwd(pa[i]);
  });
  if (out.requires_grad()) {
    TensorNode* on = out.raw();
    Tensor ta = a;
    out.node()->backward_fn = [on, ta, bwd]() mutable {
      const float* g = on->grad.data();
      const float* x = ta.data().data();
      const float* y = on->data.data();
      float* ga = ta.grad().data();
      parallel_for(on->numel(), [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) ga[i] += g[i] * bwd(x[i], y[i]);
      });
    };
  }
  finalize(out);
  return out;
}

constexpr float kInvSqrt2 = 0.70710678118654752440f;
constexpr float kInvSqrt2Pi = 0.39894228040143267794f;

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Mul, "mul"); }
Tensor div(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Div, "div"); }

Tensor add_scalar(const Tensor& a, float s) {
  return unary(
      a, "add_scalar", [s](float x) { return x + s; },
      [](float, float) { return 1.0f; });
}

Tensor mul_scalar(const Tensor& a, float s) {
  return unary(
      a, "mul_scalar", [s](float x) { return x * s; },
      [s](float, float) { return s; });
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0f); }

Tensor abs_val(const Tensor& a) {
  return unary(
      a, "abs", [](float x) { return std::fabs(x); },
      [](float x, float) { return x > 0.0f ? 1.0f : (x < 0.0f ? -1.0f : 0.0f); });
}

Tensor square(const Tensor& a) {
  return unary(
      a, "square", [](float x) { return x * x; },
      [](float x, float) { return 2.0f * x; });
}

Tensor sqrt_op(const Tensor& a) {
  return unary(
      a, "sqrt", [](float x) { return std::sqrt(x); },
      [](float, float y) { return 0.5f / y; });
}

Tensor log_op(const Tensor& a) {
  return unary(
      a, "log", [](float x) { return std::log(x); },
      [](float x, float) { return 1.0f / x; });
}

Tensor clamp_min(const Tensor& a, float lo) {
  return unary(
      a, "clamp_min", [lo](float x) { return x < lo ? lo : x; },
      [lo](float x, float) { return x >= lo ? 1.0f : 0.0f; });
}

Tensor pow_scalar(const Tensor& a, float p) {
  return unary(
      a, "pow_scalar", [p](float x) { return std::pow(x, p); },
      [p](float x, float) { return p * std::pow(x, p - 1.0f); });
}

Tensor tanh_act(const Tensor& a) {
  return unary(
      a, "tanh", [](float x) { return std::tanh(x); },
      [](float, float y) { return 1.0f - y * y; });
}

Tensor silu(const Tensor& a) {
  return unary(
      a, "silu",
      [](float x) {
        float s = 1.0f / (1.0f + std::exp(-x));
        return x * s;
      },
      [](float x, float) {
        float s = 1.0f / (1.0f + std::exp(-x));
        return s * (1.0f + x * (1.0f - s));
      });
}

Tensor gelu(const Tensor& a) {
  return unary(
      a, "gelu",
      [](float x) { return 0.5f * x * (1.0f + std::erf(x * kInvSqrt2)); },
      [](float x, float) {
        float cdf = 0.5f * (1.0f + std::erf(x * kInvSqrt2));
        float pdf = kInvSqrt2Pi * std::exp(-0.5f * x * x);
        return cdf + x * pdf;
      });
}

Tensor leaky_relu(const Tensor& a, float slope) {
  return unary(
      a, "leaky_relu", [slope](float x) { return x >= 0.0f ? x : slope * x; },
      [slope](float x, float) { return x >= 0.0f ? 1.0f : slope; });
}

Tensor elu_plus_one(const Tensor& a) {
  return unary(
      a, "elu_plus_one", [](float x) { return x > 0.0f ? x + 1.0f : std::exp(x); },
      [](float x, float y) { return x > 0.0f ? 1.0f : y; });
}

Tensor sum_all(const Tensor& a) {
  Tensor out = make_node({1}, {a}, "sum_all");
  const auto& d = a.data();
  double acc = 0.0;
  for (float v : d) acc += static_cast<double>(v);
  out.data()[0] = static_cast<float>(acc);
  if (out.requires_grad()) {
    TensorNode* on = out.raw();
    Tensor ta = a;
    out.node()->backward_fn = [on, ta]() mutable {
      float g = on->grad[0];
      float* ga = ta.grad().data();
      parallel_for(ta.numel(), [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) ga[i] += g;
      });
    };
  }
  finalize(out);
  return out;
}

Tensor mean_all(const Tensor& a) {
  Tensor out = make_node({1}, {a}, "mean_all");
  const auto& d = a.data();
  double acc = 0.0;
  for (float v : d) acc += static_cast<double>(v);
  out.data()[0] = static_cast<float>(acc / static_cast<double>(d.size()));
  if (out.requires_grad()) {
    TensorNode* on = out.raw();
    Tensor ta = a;
    out.node()->backward_fn = [on, ta]() mutable {
      float g = on->grad[0] / static_cast<float>(ta.numel());
      float* ga = ta.grad().data();
      parallel_for(ta.numel(), [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) ga[i] += g;
      });
    };
  }
  finalize(out);
  return out;
}

Tensor stop_gradient(const Tensor& a) { return a.detach(); }

Tensor ste_compose(const Tensor& soft, const Tensor& hard) {
  WLDM_CHECK(soft.shape() == hard.shape(), "ste_compose shape mismatch");
  Tensor out = make_node(soft.shape(), {soft}, "ste_compose");
  out.data() = hard.data();
  if (out.requires_grad()) {
    TensorNode* on = out.raw();
    Tensor ts = soft;
    out.node()->backward_fn = [on, ts]() mutable {
      const float* g = on->grad.data();
      float* gs = ts.grad().data();
      parallel_for(on->numel(), [&](int64_t lo, int64_t hi) {
        for (int64_t i = lo; i < hi; ++i) gs[i] += g[i];
      });
    };
  }
  finalize(out);
  return out;
}

}  // namespace wldm::ops
