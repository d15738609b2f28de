#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wldm/dsp.hpp"
#include "wldm/nn.hpp"
#include "wldm/ops.hpp"
#include "wldm/rng.hpp"
#include "wldm/tensor.hpp"

namespace wldm::codec {

/// Everything that defines a codec instance: mel front end, ConvNeXt encoder,
/// latent downsampling, grouped finite scalar quantizer, and GAN decoder.
/// The decoder's upsample factors must multiply to `hop` so that a waveform of
/// N samples round-trips to exactly N samples.
struct CodecConfig {
  // Mel front end.
  int n_fft = 2048;
  int win_length = 2048;
  int hop = 512;
  float sample_rate = 48000.0f;
  float fmin = 0.0f;
  float fmax = 24000.0f;
  float mel_floor = 1e-5f;
  int64_t n_mel = 160;

  // Encoder: stem conv to enc_widths[0], then stride-1 ConvNeXt stages with
  // 1x1 transitions between widths, then a 1x1 projection to latent width d.
  std::vector<int64_t> enc_widths = {128, 128};
  std::vector<int64_t> enc_blocks = {3, 3};
  int64_t d = 64;
  float gamma_init = 1e-2f;
  float drop_path = 0.0f;

  // Latent downsampling and quantization.
  int down_factor = 2;
  int64_t c_down = 32;
  std::vector<int> levels = {8, 5, 5, 5};
  int groups = 1;

  // Decoder: pre conv to dec_channels[0] equivalent width, one upsample stage
  // per (factor, channel) pair, zero-initialized post conv, final tanh.
  int64_t dec_init_channels = 512;
  std::vector<int64_t> dec_channels = {256, 128, 64, 32};
  std::vector<int64_t> dec_factors = {8, 8, 4, 2};

  int64_t fsq_channels() const {
    return static_cast<int64_t>(levels.size()) * groups;
  }
};

/// Depthwise conv (k=7) -> channel LayerNorm -> 1x1 expand x4 -> GELU ->
/// 1x1 contract -> per-channel gamma -> stochastic depth -> residual.
/// With gamma = 0 and drop path inactive the block is an exact identity.
struct ConvNeXtBlock1d {
  nn::Conv1d dw;
  nn::ChannelNorm1d norm;
  nn::Conv1d pw1, pw2;
  Tensor gamma;
  float drop_path_rate = 0.0f;

  static ConvNeXtBlock1d make(nn::ParamStore& ps, const std::string& prefix,
                              Pcg32& rng, int64_t channels, float gamma_init,
                              float drop_path_rate);
  Tensor forward(const Tensor& x, const nn::TrainContext& ctx) const;
};

/// Mel spectrogram (B, n_mel, L) -> latent (B, d, L), stride 1 throughout.
struct Encoder {
  nn::Conv1d stem;
  nn::ChannelNorm1d stem_norm;
  std::vector<nn::Conv1d> transitions;  // transitions[i] feeds stage i+1
  std::vector<std::vector<ConvNeXtBlock1d>> stages;
  nn::ChannelNorm1d final_norm;
  nn::Conv1d proj;

  static Encoder make(nn::ParamStore& ps, const std::string& prefix, Pcg32& rng,
                      const CodecConfig& cfg);
  Tensor forward(const Tensor& mel, const nn::TrainContext& ctx) const;
};

/// Grouped finite scalar quantizer. Channels are ordered group-major: group g
/// occupies channels [g*c, (g+1)*c) and every group shares the level list.
/// Each scalar is quantized to round(floor(L_i/2) * tanh(z)); the straight
/// through estimator backpropagates the exact gradient of that soft map.
struct Gfsq {
  std::vector<int> levels;
  int groups = 1;
  std::vector<float> channel_half;  // floor(L_i/2) tiled across groups

  struct Result {
    Tensor values;                 // (B, c*G, L), entries in {-half..half}
    std::vector<int32_t> indices;  // row-major (B, c*G, L), k = value + half
    Shape index_shape;
  };

  static Gfsq make(const std::vector<int>& levels, int groups);
  Result quantize(const Tensor& z) const;
  /// Codebook lookup: reproduces Result::values bit-exactly from indices.
  Tensor from_indices(const std::vector<int32_t>& indices, const Shape& shape) const;
  /// Codebook table for one channel of one group: entry k maps to k - half.
  std::vector<float> codebook(int group, int channel) const;
};

/// Strided conv halving L and shrinking channels d -> c_down. The 1x1
/// projection into quantizer channels is kept separate (Codec::fsq_proj) so
/// the diffusion stage can consume this pre-projection latent.
struct FDown {
  nn::Conv1d down;
  static FDown make(nn::ParamStore& ps, const std::string& prefix, Pcg32& rng,
                    const CodecConfig& cfg);
  Tensor forward(const Tensor& z) const;
};

/// Transposed conv restoring L, then a 1x1 projection restoring width d.
struct FUp {
  nn::ConvT1d up;
  nn::Conv1d proj;
  static FUp make(nn::ParamStore& ps, const std::string& prefix, Pcg32& rng,
                  const CodecConfig& cfg);
  Tensor forward(const Tensor& z_hat) const;
};

/// Three parallel convs (k = 3, 7, 11) summed, then SiLU.
struct ParallelBlock {
  nn::Conv1d c3, c7, c11;
  static ParallelBlock make(nn::ParamStore& ps, const std::string& prefix,
                            Pcg32& rng, int64_t channels);
  Tensor forward(const Tensor& x) const;
};

/// Latent (B, d, L) -> waveform (B, 1, L * prod(factors)), values in [-1, 1].
/// The post conv is zero-initialized, so the decoder maps any latent to
/// silence at init.
struct Decoder {
  nn::Conv1d pre;
  struct Stage {
    nn::ConvT1d up;
    ParallelBlock pb;
  };
  std::vector<Stage> stages;
  nn::Conv1d post;

  static Decoder make(nn::ParamStore& ps, const std::string& prefix, Pcg32& rng,
                      const CodecConfig& cfg);
  Tensor forward(const Tensor& z_q) const;
};

/// The full codec. All trainable tensors live in `params` under names
/// "codec.<submodule>.<param>", in registration order.
struct Codec {
  CodecConfig cfg;
  nn::ParamStore params;
  Encoder encoder;
  FDown fdown;
  nn::Conv1d fsq_proj;
  Gfsq gfsq;
  FUp fup;
  Decoder decoder;
  std::vector<float> mel_fb;

  static Codec make(const CodecConfig& cfg, uint64_t seed);

  /// Waveform (B, 1, N) or (B, N) with N a multiple of hop -> log mel
  /// spectrogram (B, n_mel, N / hop).
  Tensor mel(const Tensor& wave) const;
  Tensor encode(const Tensor& mel_in, const nn::TrainContext& ctx) const;
  /// encode() then fdown: the continuous latent the diffusion model lives in.
  Tensor downsample(const Tensor& z) const;
  /// fsq_proj then quantization.
  Gfsq::Result quantize_latent(const Tensor& z_down) const;
  Tensor upsample(const Tensor& z_hat) const;
  Tensor decode(const Tensor& z_q) const;

  struct ForwardOut {
    Tensor x_hat;    // reconstructed waveform (B, 1, N)
    Tensor z;        // encoder latent (B, d, L)
    Tensor z_down;   // downsampled latent (B, c_down, L/factor)
    Tensor z_hat;    // quantized values (B, c*G, L/factor)
    std::vector<int32_t> indices;
    Shape index_shape;
  };
  ForwardOut forward(const Tensor& wave, const nn::TrainContext& ctx) const;
};

}  // namespace wldm::codec
