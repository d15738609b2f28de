#pragma once

#include <cstdint>
#include <vector>

#include "wldm/nn.hpp"
#include "wldm/rng.hpp"
#include "wldm/tensor.hpp"

namespace wldm::losses {

// ---------------------------------------------------------------------------
// Reconstruction losses. Waveforms are (B, N) or (B, 1, N); both operands
// must share a shape. Every reduction is a mean over all elements, so the
// printed weights are comparable across scales and resolutions.
// ---------------------------------------------------------------------------

/// One mel scale with its filterbank precomputed at construction.
struct MelScale {
  int64_t n_mel = 0;
  int n_fft = 0;
  int win_length = 0;
  int hop = 0;
  float weight = 1.0f;
  float floor_val = 1e-5f;
  std::vector<float> fb;

  static MelScale make(int64_t n_mel, int n_fft, int win_length, int hop,
                       float sample_rate, float fmin, float fmax,
                       float weight = 1.0f, float floor_val = 1e-5f);
};

struct MultiScaleMelConfig {
  std::vector<MelScale> scales;

  /// Three scales, (n_mel, n_fft, hop) = (40, 512, 128), (80, 1024, 256),
  /// (160, 2048, 512), each with unit weight, spanning [0, sample_rate/2].
  static MultiScaleMelConfig make_default(float sample_rate);
};

/// Sum over scales of weight * mean |log-mel(x) - log-mel(x_hat)|.
Tensor mel_loss(const Tensor& x, const Tensor& x_hat, const MultiScaleMelConfig& cfg);

struct StftRes {
  int n_fft = 0;
  int win_length = 0;
  int hop = 0;
};

/// (512, 512, 128), (1024, 1024, 256), (2048, 2048, 512).
std::vector<StftRes> default_spectral_resolutions();

/// Sum over resolutions of mean | |STFT(x)| - |STFT(x_hat)| |.
Tensor spectral_loss(const Tensor& x, const Tensor& x_hat,
                     const std::vector<StftRes>& resolutions);

// ---------------------------------------------------------------------------
// Adversarial machinery: least-squares GAN over a multi-period discriminator.
// ---------------------------------------------------------------------------

/// Score map plus the ordered per-layer feature taps that produced it.
struct DiscFeatures {
  Tensor score;
  std::vector<Tensor> feats;
};

/// One period branch: the waveform is zero-padded to a multiple of `period`,
/// folded to (B, 1, N/period, period), pushed through three strided convs
/// (kernel 5x1, stride 3x1, LeakyReLU 0.1, widths 16/32/64), and scored by a
/// zero-initialized 3x1 conv. Features are the three activations plus the
/// score map.
struct PeriodDiscriminator {
  int period = 0;
  nn::Conv2d c1, c2, c3, post;

  static PeriodDiscriminator make(nn::ParamStore& ps, const std::string& prefix,
                                  Pcg32& rng, int period);
  DiscFeatures forward(const Tensor& x) const;
};

struct MultiPeriodDiscriminator {
  nn::ParamStore params;
  std::vector<PeriodDiscriminator> discs;

  static MultiPeriodDiscriminator make(const std::vector<int>& periods, uint64_t seed);
  std::vector<DiscFeatures> forward(const Tensor& x) const;
};

/// Least-squares objectives on raw score maps: the discriminator drives real
/// scores to 1 and fake to 0; the generator drives fake scores to 1.
Tensor lsgan_disc_loss(const Tensor& score_real, const Tensor& score_fake);
Tensor lsgan_gen_loss(const Tensor& score_fake);

struct AdvLosses {
  Tensor gen;
  Tensor disc;
};

/// Averages the LSGAN objectives over the period branches. The discriminator
/// side sees x_hat through a gradient stop, so its loss trains only the
/// discriminator while the generator side trains only the generator.
AdvLosses adversarial_losses(const MultiPeriodDiscriminator& mpd, const Tensor& x,
                             const Tensor& x_hat);

// ---------------------------------------------------------------------------
// Feature matching and the weighted total.
// ---------------------------------------------------------------------------

/// Sum over layers of lambda_l * mean |real_l - fake_l|. The per-element mean
/// normalizes each layer by its own size. Empty lambda_l means all ones.
Tensor feature_matching_loss(const std::vector<Tensor>& feats_real,
                             const std::vector<Tensor>& feats_fake,
                             const std::vector<float>& lambda_l = {});

struct LossWeights {
  float lambda_mel = 30.0f;
  float lambda_spectral = 20.0f;
  float lambda_fm = 2.0f;
  std::vector<float> lambda_l;  ///< feature-matching per-layer weights; empty = ones
};

/// adv + lambda_mel * mel + lambda_spectral * spectral + lambda_fm * fm.
Tensor total_loss(const Tensor& adv, const Tensor& mel, const Tensor& spectral,
                  const Tensor& fm, const LossWeights& w);

}  // namespace wldm::losses
