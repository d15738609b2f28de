#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wldm/nn.hpp"
#include "wldm/ops.hpp"
#include "wldm/rng.hpp"
#include "wldm/tensor.hpp"

namespace wldm::estimator {

/// Sinusoidal timestep embedding: interleaved sin/cos pairs at geometrically
/// spaced frequencies with base 10000. Width must be even.
std::vector<float> sinusoidal_embed(int64_t t, int64_t width);

/// Batched embedding: one row per timestep, shape (B, width). Not trainable.
Tensor sinusoidal_embed_batch(const std::vector<int64_t>& ts, int64_t width);

/// Feature-wise linear modulation: (1 + gamma) * u + beta, all same shape.
Tensor film(const Tensor& u, const Tensor& gamma, const Tensor& beta);

/// Linear attention over sequences. q, k, v are (G, L, h); the kernel feature
/// map phi(x) = elu(x) + 1 is applied to q and k inside, so the normalizer
/// phi(q) . sum_j phi(k_j) is strictly positive. Cost is O(L * h^2) instead
/// of the O(L^2 * h) of explicit attention weights.
Tensor linear_attention(const Tensor& q, const Tensor& k, const Tensor& v);

struct UNetConfig {
  int64_t c_base = 64;
  int stages = 4;
  int heads = 4;           // per stage; head dim = stage channels / heads
  int64_t time_width = 128;
  int64_t cond_channels = 32;
  float drop_path = 0.0f;
};

/// ConvNeXt-style 2-D block conditioned on timestep and degraded latent:
/// depthwise conv -> channel LayerNorm -> FiLM -> 1x1 expand x4 -> GELU ->
/// 1x1 contract -> residual. FiLM parameters come from a 1x1 conv over the
/// channel concat of the broadcast timestep embedding and the conditioning
/// latent resized to the feature map (nearest neighbor). The contract conv is
/// zero-initialized, so the block is an exact identity at init.
struct TConvNeXtBlock2d {
  nn::Conv2d dw;
  nn::ChannelNorm2d norm;
  nn::Conv2d film_conv;
  nn::Conv2d pw1, pw2;
  float drop_path_rate = 0.0f;

  static TConvNeXtBlock2d make(nn::ParamStore& ps, const std::string& prefix,
                               Pcg32& rng, int64_t channels, int64_t time_width,
                               int64_t cond_channels, float drop_path_rate);
  Tensor forward(const Tensor& x, const Tensor& temb, const Tensor& cond,
                 const nn::TrainContext& ctx) const;
};

/// Two 3x3 convs with group normalization and SiLU, a per-channel additive
/// timestep bias after the first conv, and a 1x1 skip projection when the
/// channel count changes.
struct ResBlock2d {
  nn::GroupNorm gn1, gn2;
  nn::Conv2d conv1, conv2;
  nn::Conv1d tproj;
  nn::Conv2d skip;
  bool has_skip = false;

  static ResBlock2d make(nn::ParamStore& ps, const std::string& prefix, Pcg32& rng,
                         int64_t cin, int64_t cout, int64_t time_width);
  Tensor forward(const Tensor& x, const Tensor& temb) const;
};

/// Multi-head linear attention over the time axis of a (B, C, H, W) map with
/// rotary position embeddings on q and k. The H axis is folded into the batch
/// so every row attends along W only. Residual, with a zero-initialized
/// output projection.
struct RotaryAttention2d {
  nn::GroupNorm norm;
  nn::Conv2d q, k, v, out;
  int heads = 4;

  static RotaryAttention2d make(nn::ParamStore& ps, const std::string& prefix,
                                Pcg32& rng, int64_t channels, int heads);
  Tensor forward(const Tensor& x) const;
};

/// Rotary U-Net noise estimator. Input (B, d, L) is lifted to a (B, c_base,
/// d, L) map, passed through `stages` downsampling stages (each: ResBlock,
/// T-ConvNeXt, attention, then a stride-2 conv that doubles channels), a
/// bottleneck of the same recipe, and a mirrored upsampling path whose stages
/// concatenate the pre-downsample skip. The zero-initialized head maps back
/// to (B, d, L). Trainable tensors live in `params` under "unet.<stage>...".
struct UNet {
  UNetConfig cfg;
  nn::ParamStore params;
  nn::Conv2d in_proj;
  struct DownStage {
    ResBlock2d res;
    TConvNeXtBlock2d tcn;
    RotaryAttention2d attn;
    nn::Conv2d down;
  };
  struct UpStage {
    nn::ConvT2d up;
    ResBlock2d res;
    TConvNeXtBlock2d tcn;
    RotaryAttention2d attn;
  };
  std::vector<DownStage> downs;
  ResBlock2d mid_res;
  TConvNeXtBlock2d mid_tcn;
  RotaryAttention2d mid_attn;
  std::vector<UpStage> ups;
  nn::Conv2d out_proj;

  static UNet make(const UNetConfig& cfg, uint64_t seed);

  /// z_t: (B, d, L); cond: (B, cond_channels, L_cond); ts: one timestep per
  /// batch element. d and L must be divisible by 2^stages.
  Tensor forward(const Tensor& z_t, const Tensor& cond,
                 const std::vector<int64_t>& ts,
                 const nn::TrainContext& ctx = {}) const;
};

}  // namespace wldm::estimator
