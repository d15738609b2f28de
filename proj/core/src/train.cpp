#include "wldm/train.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "wldm/common.hpp"
#include "wldm/degrade.hpp"
#include "wldm/losses.hpp"
#include "wldm/ops.hpp"
#include "wldm/optim.hpp"

namespace wldm::train {

namespace {

// Checkpoint meta enums.
constexpr uint64_t kStageCodec = 0, kStageDiffusion = 1;
constexpr uint64_t kModelDesk = 0, kModelFull = 1;

uint64_t model_code(const std::string& model) {
  if (model == "desk") return kModelDesk;
  if (model == "full") return kModelFull;
  WLDM_CHECK(false, "unknown model preset '" + model + "'");
}

std::string model_name(uint64_t code) {
  WLDM_CHECK(code == kModelDesk || code == kModelFull,
             "checkpoint names an unknown model preset");
  return code == kModelDesk ? "desk" : "full";
}

void check_clips(const std::vector<audio::AudioClip>& clips, int64_t seq_len,
                 int sample_rate) {
  WLDM_CHECK(!clips.empty(), "dataset is empty");
  for (size_t i = 0; i < clips.size(); ++i) {
    WLDM_CHECK(clips[i].sample_rate == sample_rate,
               "clip " + std::to_string(i) + " has sample rate " +
                   std::to_string(clips[i].sample_rate) + ", expected " +
                   std::to_string(sample_rate));
    WLDM_CHECK(static_cast<int64_t>(clips[i].samples.size()) >= seq_len,
               "clip " + std::to_string(i) + " has " +
                   std::to_string(clips[i].samples.size()) +
                   " samples, shorter than seq_len " + std::to_string(seq_len));
  }
}

void check_finite(double loss, const char* what, int64_t step) {
  WLDM_CHECK(std::isfinite(loss),
             std::string(what) + " diverged to a non-finite value at step " +
                 std::to_string(step + 1) +
                 "; lower the learning rate or check the input data");
}

/// Copies clips[idx][start .. start+n) into row b of a (B, 1, n) buffer.
void copy_window(std::vector<float>& buf, int64_t b, int64_t n,
                 const std::vector<float>& samples, int64_t start) {
  for (int64_t i = 0; i < n; ++i) {
    buf[static_cast<size_t>(b * n + i)] = samples[static_cast<size_t>(start + i)];
  }
}

Tensor mean_over(std::vector<Tensor> terms) {
  Tensor total;
  for (const Tensor& t : terms) {
    total = total.defined() ? ops::add(total, t) : t;
  }
  return ops::mul_scalar(total, 1.0f / static_cast<float>(terms.size()));
}

}  // namespace

codec::CodecConfig codec_config_for(const std::string& model) {
  if (model == "full") return codec::CodecConfig{};
  WLDM_CHECK(model == "desk", "unknown model preset '" + model + "'");
  codec::CodecConfig c;
  c.n_fft = 1024;
  c.win_length = 1024;
  c.hop = 512;
  c.n_mel = 40;
  c.enc_widths = {32, 32};
  c.enc_blocks = {1, 1};
  c.d = 16;
  c.down_factor = 2;
  c.c_down = 8;
  c.dec_init_channels = 64;
  c.dec_channels = {32, 16, 8, 8};
  c.dec_factors = {8, 8, 4, 2};
  return c;
}

estimator::UNetConfig unet_config_for(const std::string& model) {
  estimator::UNetConfig u;
  if (model == "full") {
    u.cond_channels = codec::CodecConfig{}.c_down;
    return u;
  }
  WLDM_CHECK(model == "desk", "unknown model preset '" + model + "'");
  u.c_base = 8;
  u.stages = 2;
  u.heads = 2;
  u.time_width = 32;
  u.cond_channels = codec_config_for("desk").c_down;
  return u;
}

std::string log_to_text(const std::vector<LogEntry>& log) {
  std::ostringstream out;
  char buf[96];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%lld\t%.17g\t%.17g\n",
                  static_cast<long long>(e.step), e.loss, e.lr);
    out << buf;
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Stage 1: codec.
// ---------------------------------------------------------------------------

TrainResult train_codec(const config::TrainConfig& cfg,
                        const std::vector<audio::AudioClip>& clips,
                        const ckpt::Checkpoint* resume, const CheckpointSink& sink) {
  cfg.validate();
  WLDM_CHECK(cfg.stage == "codec", "train_codec called with stage '" + cfg.stage + "'");

  codec::CodecConfig ccfg = codec_config_for(cfg.model);
  int64_t unit = ccfg.hop * ccfg.down_factor;
  WLDM_CHECK(cfg.seq_len % unit == 0,
             "seq_len must be a multiple of " + std::to_string(unit) +
                 " (hop " + std::to_string(ccfg.hop) + " x latent downsample " +
                 std::to_string(ccfg.down_factor) + ")");
  check_clips(clips, cfg.seq_len, static_cast<int>(ccfg.sample_rate));

  codec::Codec model = codec::Codec::make(ccfg, cfg.seed);
  losses::MultiPeriodDiscriminator mpd =
      losses::MultiPeriodDiscriminator::make({2, 3, 5}, cfg.seed + 1);
  losses::MultiScaleMelConfig mel_cfg =
      losses::MultiScaleMelConfig::make_default(ccfg.sample_rate);
  std::vector<losses::StftRes> spec_res = losses::default_spectral_resolutions();
  losses::LossWeights weights;

  optim::AdamConfig ocfg;
  ocfg.lr = cfg.lr;
  ocfg.beta1 = cfg.beta1;
  ocfg.beta2 = cfg.beta2;
  ocfg.eps = cfg.adam_eps;
  ocfg.weight_decay = cfg.weight_decay;
  optim::Adam opt_g(model.params, ocfg);
  optim::Adam opt_d(mpd.params, ocfg);

  Pcg32 rng(cfg.seed + 2);
  int64_t start_step = 0;
  if (resume) {
    WLDM_CHECK(resume->get_u64("meta.stage") == kStageCodec,
               "resume checkpoint is not a codec-stage checkpoint");
    WLDM_CHECK(model_name(resume->get_u64("meta.model")) == cfg.model,
               "resume checkpoint was trained with a different model preset");
    ckpt::get_params(*resume, model.params);
    ckpt::get_params(*resume, mpd.params);
    ckpt::get_optimizer(*resume, "opt_g", opt_g);
    ckpt::get_optimizer(*resume, "opt_d", opt_d);
    ckpt::get_rng(*resume, "rng", rng);
    start_step = static_cast<int64_t>(resume->get_u64("train.step"));
    WLDM_CHECK(start_step < cfg.steps,
               "checkpoint is already at step " + std::to_string(start_step) +
                   " of " + std::to_string(cfg.steps));
  }

  auto make_checkpoint = [&](int64_t done) {
    ckpt::Checkpoint c;
    c.add_u64("meta.stage", kStageCodec);
    c.add_u64("meta.model", model_code(cfg.model));
    c.add_u64("train.step", static_cast<uint64_t>(done));
    ckpt::put_params(c, model.params);
    ckpt::put_params(c, mpd.params);
    ckpt::put_optimizer(c, "opt_g", opt_g);
    ckpt::put_optimizer(c, "opt_d", opt_d);
    ckpt::put_rng(c, "rng", rng);
    return c;
  };

  TrainResult result;
  nn::TrainContext ctx{true, &rng};
  int64_t B = cfg.batch_size, N = cfg.seq_len;

  for (int64_t step = start_step; step < cfg.steps; ++step) {
    float lr_now = optim::lr_schedule(step, cfg.lr, cfg.lr_gamma, cfg.lr_interval);

    std::vector<float> buf(static_cast<size_t>(B * N));
    for (int64_t b = 0; b < B; ++b) {
      const auto& clip =
          clips[rng.uniform_u32(static_cast<uint32_t>(clips.size()))].samples;
      int64_t span = static_cast<int64_t>(clip.size()) - N;
      int64_t start =
          span == 0 ? 0
                    : static_cast<int64_t>(rng.uniform_u32(static_cast<uint32_t>(span + 1)));
      copy_window(buf, b, N, clip, start);
    }
    Tensor x = Tensor::from_data({B, 1, N}, std::move(buf));

    codec::Codec::ForwardOut fwd = model.forward(x, ctx);
    Tensor x_hat = fwd.x_hat;

    // Discriminator update: generator output enters through a gradient stop.
    std::vector<losses::DiscFeatures> real = mpd.forward(x);
    std::vector<losses::DiscFeatures> fake_d = mpd.forward(ops::stop_gradient(x_hat));
    std::vector<Tensor> disc_terms;
    for (size_t i = 0; i < real.size(); ++i) {
      disc_terms.push_back(losses::lsgan_disc_loss(real[i].score, fake_d[i].score));
    }
    Tensor disc = mean_over(std::move(disc_terms));
    check_finite(disc.item(), "discriminator loss", step);
    mpd.params.zero_grad();
    disc.backward();
    opt_d.step(mpd.params, lr_now);

    // Generator update, through the just-updated discriminator.
    std::vector<losses::DiscFeatures> fake_g = mpd.forward(x_hat);
    std::vector<Tensor> adv_terms, fm_terms;
    for (size_t i = 0; i < fake_g.size(); ++i) {
      adv_terms.push_back(losses::lsgan_gen_loss(fake_g[i].score));
      std::vector<Tensor> target_feats;
      for (const Tensor& f : real[i].feats) {
        target_feats.push_back(ops::stop_gradient(f));
      }
      fm_terms.push_back(
          losses::feature_matching_loss(target_feats, fake_g[i].feats, weights.lambda_l));
    }
    Tensor adv = mean_over(std::move(adv_terms));
    Tensor fm = mean_over(std::move(fm_terms));
    Tensor mel = losses::mel_loss(x, x_hat, mel_cfg);
    Tensor spec = losses::spectral_loss(x, x_hat, spec_res);
    Tensor total = losses::total_loss(adv, mel, spec, fm, weights);
    double loss = total.item();
    check_finite(loss, "generator loss", step);
    model.params.zero_grad();
    total.backward();
    opt_g.step(model.params, lr_now);

    result.log.push_back({step + 1, loss, static_cast<double>(lr_now)});
    if (sink && ((step + 1) % cfg.checkpoint_every == 0 || step + 1 == cfg.steps)) {
      sink(step + 1, make_checkpoint(step + 1));
    }
  }
  result.checkpoint = make_checkpoint(cfg.steps);
  return result;
}

// ---------------------------------------------------------------------------
// Stage 2: diffusion estimator in the frozen latent space.
// ---------------------------------------------------------------------------

TrainResult train_diffusion(const config::TrainConfig& cfg,
                            const std::vector<audio::AudioClip>& clips,
                            const ckpt::Checkpoint& codec_ckpt,
                            const ckpt::Checkpoint* resume, const CheckpointSink& sink) {
  cfg.validate();
  WLDM_CHECK(cfg.stage == "diffusion",
             "train_diffusion called with stage '" + cfg.stage + "'");
  WLDM_CHECK(codec_ckpt.contains("meta.stage") &&
                 codec_ckpt.get_u64("meta.stage") == kStageCodec,
             "stage-2 training needs a codec checkpoint (train the codec first)");
  std::string codec_model = model_name(codec_ckpt.get_u64("meta.model"));
  WLDM_CHECK(codec_model == cfg.model,
             "config model '" + cfg.model + "' but the codec checkpoint was trained "
             "with model '" + codec_model + "'");

  codec::CodecConfig ccfg = codec_config_for(cfg.model);
  codec::Codec codec_model_obj = codec::Codec::make(ccfg, cfg.seed);
  ckpt::get_params(codec_ckpt, codec_model_obj.params);

  estimator::UNetConfig ucfg = unet_config_for(cfg.model);
  estimator::UNet unet = estimator::UNet::make(ucfg, cfg.seed + 3);

  int64_t unit = static_cast<int64_t>(ccfg.hop) * ccfg.down_factor
                 * (int64_t(1) << ucfg.stages);
  WLDM_CHECK(cfg.seq_len % unit == 0,
             "seq_len must be a multiple of " + std::to_string(unit) +
                 " samples (hop " + std::to_string(ccfg.hop) + " x downsample " +
                 std::to_string(ccfg.down_factor) + " x 2^" +
                 std::to_string(ucfg.stages) + ")");
  check_clips(clips, cfg.seq_len, static_cast<int>(ccfg.sample_rate));

  diffusion::VarianceSchedule sched = diffusion::make_schedule(
      diffusion::ScheduleKind::kLinear, cfg.diffusion_steps,
      static_cast<double>(cfg.beta_start), static_cast<double>(cfg.beta_end));
  diffusion::EstimatorFn est = diffusion::as_estimator(unet);

  optim::AdamConfig ocfg;
  ocfg.lr = cfg.lr;
  ocfg.beta1 = cfg.beta1;
  ocfg.beta2 = cfg.beta2;
  ocfg.eps = cfg.adam_eps;
  ocfg.weight_decay = cfg.weight_decay;
  optim::Adam opt(unet.params, ocfg);

  Pcg32 rng(cfg.seed + 4);
  int64_t start_step = 0;
  if (resume) {
    WLDM_CHECK(resume->get_u64("meta.stage") == kStageDiffusion,
               "resume checkpoint is not a diffusion-stage checkpoint");
    WLDM_CHECK(model_name(resume->get_u64("meta.model")) == cfg.model,
               "resume checkpoint was trained with a different model preset");
    ckpt::get_params(*resume, unet.params);
    ckpt::get_optimizer(*resume, "opt_g", opt);
    ckpt::get_rng(*resume, "rng", rng);
    start_step = static_cast<int64_t>(resume->get_u64("train.step"));
    WLDM_CHECK(start_step < cfg.steps,
               "checkpoint is already at step " + std::to_string(start_step) +
                   " of " + std::to_string(cfg.steps));
  }

  auto make_checkpoint = [&](int64_t done) {
    ckpt::Checkpoint c;
    c.add_u64("meta.stage", kStageDiffusion);
    c.add_u64("meta.model", model_code(cfg.model));
    c.add_u64("meta.t", static_cast<uint64_t>(cfg.diffusion_steps));
    c.add("meta.beta_start", {}, {cfg.beta_start});
    c.add("meta.beta_end", {}, {cfg.beta_end});
    c.add_u64("train.step", static_cast<uint64_t>(done));
    ckpt::put_params(c, codec_model_obj.params);  // frozen copy for inference
    ckpt::put_params(c, unet.params);
    ckpt::put_optimizer(c, "opt_g", opt);
    ckpt::put_rng(c, "rng", rng);
    return c;
  };

  TrainResult result;
  nn::TrainContext ctx{false, nullptr};  // codec runs in eval mode, frozen
  int64_t B = cfg.batch_size, N = cfg.seq_len;
  degrade::DegradationSpec dspec;
  dspec.kind = degrade::Kind::kMask;
  dspec.mask_ms = cfg.mask_ms;

  for (int64_t step = start_step; step < cfg.steps; ++step) {
    float lr_now = optim::lr_schedule(step, cfg.lr, cfg.lr_gamma, cfg.lr_interval);

    std::vector<float> clean(static_cast<size_t>(B * N));
    std::vector<float> degraded(static_cast<size_t>(B * N));
    for (int64_t b = 0; b < B; ++b) {
      const audio::AudioClip& clip =
          clips[rng.uniform_u32(static_cast<uint32_t>(clips.size()))];
      degrade::DegradeResult deg = degrade::degrade(clip, dspec, rng);
      int64_t span = static_cast<int64_t>(clip.samples.size()) - N;
      int64_t start =
          span == 0 ? 0
                    : static_cast<int64_t>(rng.uniform_u32(static_cast<uint32_t>(span + 1)));
      copy_window(clean, b, N, clip.samples, start);
      copy_window(degraded, b, N, deg.clip.samples, start);
    }

    diffusion::DiffusionPair pair;
    {
      NoGradGuard ng;
      Tensor xw = Tensor::from_data({B, 1, N}, std::move(clean));
      Tensor dw = Tensor::from_data({B, 1, N}, std::move(degraded));
      pair.z0 = codec_model_obj.downsample(
          codec_model_obj.encode(codec_model_obj.mel(xw), ctx));
      pair.z0_degraded = codec_model_obj.downsample(
          codec_model_obj.encode(codec_model_obj.mel(dw), ctx));
    }

    Tensor loss_t = diffusion::training_step(pair, est, sched, rng);
    double loss = loss_t.item();
    check_finite(loss, "diffusion loss", step);
    unet.params.zero_grad();
    loss_t.backward();
    opt.step(unet.params, lr_now);

    result.log.push_back({step + 1, loss, static_cast<double>(lr_now)});
    if (sink && ((step + 1) % cfg.checkpoint_every == 0 || step + 1 == cfg.steps)) {
      sink(step + 1, make_checkpoint(step + 1));
    }
  }
  result.checkpoint = make_checkpoint(cfg.steps);
  return result;
}

// ---------------------------------------------------------------------------
// Rebuilding models from checkpoints.
// ---------------------------------------------------------------------------

codec::Codec codec_from_checkpoint(const ckpt::Checkpoint& c) {
  std::string model = model_name(c.get_u64("meta.model"));
  codec::Codec codec_obj = codec::Codec::make(codec_config_for(model), 0);
  ckpt::get_params(c, codec_obj.params);
  return codec_obj;
}

RestoreBundle bundle_from_checkpoint(const ckpt::Checkpoint& c) {
  WLDM_CHECK(c.contains("meta.stage") && c.get_u64("meta.stage") == kStageDiffusion,
             "restoration needs a diffusion-stage checkpoint");
  std::string model = model_name(c.get_u64("meta.model"));
  RestoreBundle b{codec::Codec::make(codec_config_for(model), 0),
                  estimator::UNet::make(unet_config_for(model), 0),
                  diffusion::VarianceSchedule{}};
  ckpt::get_params(c, b.codec.params);
  ckpt::get_params(c, b.unet.params);
  b.schedule = diffusion::make_schedule(
      diffusion::ScheduleKind::kLinear, static_cast<int>(c.get_u64("meta.t")),
      static_cast<double>(c.find("meta.beta_start").data[0]),
      static_cast<double>(c.find("meta.beta_end").data[0]));
  return b;
}

}  // namespace wldm::train
