#pragma once

#include <functional>
#include <string>
#include <vector>

#include "wldm/codec.hpp"
#include "wldm/estimator.hpp"
#include "wldm/rng.hpp"
#include "wldm/tensor.hpp"

namespace wldm::diffusion {

// ---------------------------------------------------------------------------
// Variance schedule. Timesteps are 1-based: accessors take t in [1, T].
// ---------------------------------------------------------------------------
enum class ScheduleKind { kLinear };

/// Parses "linear"; throws on anything else.
ScheduleKind schedule_kind_from_string(const std::string& s);

struct VarianceSchedule {
  int T = 0;
  std::vector<float> beta;       ///< beta_t, strictly increasing in (0,1)
  std::vector<float> alpha;      ///< 1 - beta_t
  std::vector<float> alpha_bar;  ///< running product of alpha, strictly decreasing
  std::vector<float> sigma;      ///< sqrt(beta_t)

  float beta_at(int t) const;
  float alpha_at(int t) const;
  float alpha_bar_at(int t) const;
  float sigma_at(int t) const;
};

/// Builds the schedule; beta interpolates linearly from beta_1 to beta_T over
/// T steps. Requires 0 < beta_1 < beta_T < 1 and T >= 1. alpha_bar is
/// accumulated as a float sequence with each product carried out in double,
/// so alpha_bar[t] == alpha_bar[t-1] * alpha[t] holds to float rounding.
VarianceSchedule make_schedule(ScheduleKind kind, int T, double beta_1, double beta_T);

// ---------------------------------------------------------------------------
// Forward (noising) process.
// ---------------------------------------------------------------------------

/// One noising step: sqrt(alpha_t) * z_prev + sqrt(1 - alpha_t) * eps.
Tensor forward_step(const Tensor& z_prev, int t, const Tensor& eps,
                    const VarianceSchedule& s);

/// Closed-form marginal: sqrt(alpha_bar_t) * z0 + sqrt(1 - alpha_bar_t) * eps.
Tensor forward_marginal(const Tensor& z0, int t, const Tensor& eps,
                        const VarianceSchedule& s);

// ---------------------------------------------------------------------------
// Training and sampling.
// ---------------------------------------------------------------------------

/// A clean latent and its degraded counterpart used as conditioning.
struct DiffusionPair {
  Tensor z0;           ///< clean latent (B, C, L)
  Tensor z0_degraded;  ///< degraded latent, identical shape
};

/// Noise estimator interface: (z_t, conditioning, per-element timesteps) ->
/// predicted noise of z_t's shape. Lets tests substitute closed-form
/// estimators for the network.
using EstimatorFn =
    std::function<Tensor(const Tensor& z_t, const Tensor& cond,
                         const std::vector<int64_t>& ts)>;

/// Wraps a network so it can be passed where an EstimatorFn is expected.
EstimatorFn as_estimator(const estimator::UNet& unet);

/// One denoising-score-matching objective evaluation: draws one timestep per
/// batch element (uniform on {1..T}), then noise for the whole batch in
/// row-major order, and returns the mean squared error between the drawn and
/// the predicted noise. Gradients flow into whatever the estimator touched.
Tensor training_step(const DiffusionPair& pair, const EstimatorFn& est,
                     const VarianceSchedule& s, Pcg32& rng);

/// Ancestral sampler: starts from standard normal noise shaped like the
/// conditioning, walks t = T..1 with
///   z_{t-1} = (z_t - (1-alpha_t)/sqrt(1-alpha_bar_t) * eps_hat) / sqrt(alpha_t)
///             + sigma_t * zeta,
/// where zeta is fresh noise except at t = 1 (none drawn there). Runs without
/// building an autodiff graph; bit-deterministic for a fixed rng state.
Tensor sample(const Tensor& z0_degraded, const EstimatorFn& est,
              const VarianceSchedule& s, Pcg32& rng);

/// Full restoration: degraded waveform -> mel -> encoder -> downsampled
/// latent (the conditioning), denoised by the sampler, then quantized,
/// upsampled, and decoded back to a waveform in [-1, 1]. Throws with padding
/// guidance when the input length does not divide down to the U-Net grid.
Tensor restore(const Tensor& wave_degraded, const codec::Codec& codec,
               const estimator::UNet& unet, const VarianceSchedule& s,
               Pcg32& rng);

}  // namespace wldm::diffusion
