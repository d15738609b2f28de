#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wldm/audio.hpp"
#include "wldm/checkpoint.hpp"
#include "wldm/codec.hpp"
#include "wldm/config.hpp"
#include "wldm/diffusion.hpp"
#include "wldm/estimator.hpp"

namespace wldm::train {

/// Model-size presets named by TrainConfig::model: "full" is the full-scale
/// architecture, "desk" a laptop-sized one for tests and demos. The two
/// functions agree on the latent geometry (U-Net cond_channels equals the
/// codec's c_down).
codec::CodecConfig codec_config_for(const std::string& model);
estimator::UNetConfig unet_config_for(const std::string& model);

struct LogEntry {
  int64_t step = 0;   ///< 1-based: steps completed
  double loss = 0.0;  ///< stage total (generator total / diffusion MSE)
  double lr = 0.0;
};

/// Loss curve as "step\tloss\tlr" lines (%.17g), one per step.
std::string log_to_text(const std::vector<LogEntry>& log);

struct TrainResult {
  ckpt::Checkpoint checkpoint;  ///< state after the final step
  std::vector<LogEntry> log;
};

/// Called after every `checkpoint_every` completed steps and after the final
/// step, with the step count and a full checkpoint.
using CheckpointSink = std::function<void(int64_t step, const ckpt::Checkpoint&)>;

/// Stage 1: adversarial codec training. Per step, a batch of random
/// `seq_len`-sample windows is assembled, the discriminator takes one update
/// (least-squares objective, generator output through a gradient stop), then
/// the generator takes one update on the weighted total loss. All randomness
/// flows through one coordinator RNG in a fixed order (per batch element:
/// clip index then window start; then any stochastic-depth draws), so a fixed
/// seed and config give bit-identical checkpoints. A non-finite loss aborts
/// with diagnostics. The checkpoint carries codec and discriminator
/// parameters, both optimizer states, the RNG state, and the step counter;
/// `resume` continues a run bit-exactly from such a checkpoint.
TrainResult train_codec(const config::TrainConfig& cfg,
                        const std::vector<audio::AudioClip>& clips,
                        const ckpt::Checkpoint* resume = nullptr,
                        const CheckpointSink& sink = nullptr);

/// Stage 2: denoising estimator training in the frozen codec's latent space.
/// `codec_ckpt` must be a stage-1 checkpoint; its parameters are loaded and
/// never updated. Per step and batch element: a clip is drawn, degraded with
/// a `mask_ms` mask at a random position, and a random window of both
/// versions is encoded (no gradients) into a latent pair; the estimator
/// trains on the noise-prediction MSE. Determinism and resume semantics match
/// train_codec. The checkpoint additionally carries the frozen codec so it is
/// self-contained for inference.
TrainResult train_diffusion(const config::TrainConfig& cfg,
                            const std::vector<audio::AudioClip>& clips,
                            const ckpt::Checkpoint& codec_ckpt,
                            const ckpt::Checkpoint* resume = nullptr,
                            const CheckpointSink& sink = nullptr);

/// Rebuilds a codec from any checkpoint that carries codec parameters.
codec::Codec codec_from_checkpoint(const ckpt::Checkpoint& c);

/// Everything needed to run restoration, rebuilt from a stage-2 checkpoint.
struct RestoreBundle {
  codec::Codec codec;
  estimator::UNet unet;
  diffusion::VarianceSchedule schedule;
};
RestoreBundle bundle_from_checkpoint(const ckpt::Checkpoint& c);

}  // namespace wldm::train
