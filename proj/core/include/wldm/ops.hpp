#pragma once

#include "wldm/tensor.hpp"

namespace wldm::ops {

// ---------------------------------------------------------------------------
// Elementwise arithmetic. Binary ops require identical shapes except that the
// right operand may have size 1 on trailing axes where the left does not
// (broadcast of a per-row scalar, used by normalizers and linear attention).
// ---------------------------------------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add_scalar(const Tensor& a, float s);
Tensor mul_scalar(const Tensor& a, float s);
Tensor neg(const Tensor& a);

Tensor abs_val(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt_op(const Tensor& a);
Tensor log_op(const Tensor& a);
Tensor clamp_min(const Tensor& a, float lo);
Tensor pow_scalar(const Tensor& a, float p);

// Activations.
Tensor tanh_act(const Tensor& a);
Tensor silu(const Tensor& a);
Tensor gelu(const Tensor& a);  // exact erf form
Tensor leaky_relu(const Tensor& a, float slope);
Tensor elu_plus_one(const Tensor& a);  // elu(x) + 1; strictly positive feature map

// Reductions (double accumulators, fixed order).
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);

// ---------------------------------------------------------------------------
// Shape ops.
// ---------------------------------------------------------------------------
Tensor reshape(const Tensor& a, const Shape& shape);
Tensor narrow(const Tensor& a, int axis, int64_t start, int64_t length);
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor permute(const Tensor& a, const std::vector<int>& perm);

/// Nearest-neighbour resize of the two trailing axes of a (..., H, W) tensor.
Tensor interpolate_nearest2d(const Tensor& a, int64_t out_h, int64_t out_w);

/// Identity in inference; during training scales by 1/(1-p) and zeroes whole
/// per-sample residual branches chosen by the caller-supplied mask.
Tensor drop_path(const Tensor& a, const std::vector<float>& keep_mask, float keep_prob);

// ---------------------------------------------------------------------------
// Matmul: (..., M, K) x (..., K, N) -> (..., M, N) with identical leading
// (batch) axes. Accumulates in double.
// ---------------------------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);

// ---------------------------------------------------------------------------
// Convolutions. Weight layouts: conv (C_out, C_in/groups, k); transposed
// conv (C_in, C_out/groups, k). 2D variants take kh/kw etc. Bias is optional
// (pass an undefined Tensor to skip).
// ---------------------------------------------------------------------------
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b,
              int stride, int padding, int dilation, int groups);
Tensor conv_transpose1d(const Tensor& x, const Tensor& w, const Tensor& b,
                        int stride, int padding, int groups);
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b,
              int stride_h, int stride_w, int pad_h, int pad_w, int groups);
Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& b,
                        int stride_h, int stride_w, int pad_h, int pad_w, int groups);

// ---------------------------------------------------------------------------
// Normalizers. Statistics are computed in double and saved for backward.
// ---------------------------------------------------------------------------

/// Normalizes over the trailing `norm_axes` axes; gamma/beta have the shape
/// of those axes.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  int norm_axes, float eps);

/// LayerNorm over the channel axis of (B, C, L): per (b, l) position.
Tensor layer_norm_channels(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps);

/// GroupNorm over (B, C, H, W) with `num_groups` channel groups.
Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  int num_groups, float eps);

// Per-channel affine helpers for (B, C, ...) tensors: y = x * s[c] and
// y = x + b[c].
Tensor scale_channels(const Tensor& x, const Tensor& s);
Tensor add_channel_bias(const Tensor& x, const Tensor& b);

// ---------------------------------------------------------------------------
// Specials.
// ---------------------------------------------------------------------------

/// Rotary position encoding over the trailing axis pairs of (..., L, C):
/// channel pair (2i, 2i+1) at sequence position pos (given per row of L) is
/// rotated by angle pos * base^(-2i/C).
Tensor rope_rotate(const Tensor& x, const std::vector<float>& positions, float base);

/// Gradient-blocked pass-through (same data, no parents).
Tensor stop_gradient(const Tensor& a);

/// y = a + (b - a).detach(): forward value b, gradient flows to a only.
/// The straight-through estimator composition used by the quantizer.
Tensor ste_compose(const Tensor& soft, const Tensor& hard);

}  // namespace wldm::ops
