#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "wldm/audio.hpp"
#include "wldm/checkpoint.hpp"
#include "wldm/config.hpp"
#include "wldm/diffusion.hpp"
#include "wldm/train.hpp"

using namespace wldm;

namespace {

std::vector<char> file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::vector<char>((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
}

std::vector<char> ckpt_bytes(const ckpt::Checkpoint& c, const std::string& path) {
  c.save(path);
  return file_bytes(path);
}

config::TrainConfig tiny_codec_cfg() {
  config::TrainConfig cfg = config::TrainConfig::desk_codec();
  cfg.steps = 2;
  cfg.batch_size = 1;
  cfg.seq_len = 4096;
  cfg.checkpoint_every = 1000;  // only the final-step checkpoint fires
  cfg.seed = 9;
  return cfg;
}

config::TrainConfig tiny_diffusion_cfg() {
  config::TrainConfig cfg = config::TrainConfig::desk_diffusion();
  cfg.steps = 2;
  cfg.batch_size = 1;
  cfg.seq_len = 4096;
  cfg.checkpoint_every = 1000;
  cfg.seed = 9;
  return cfg;
}

}  // namespace

TEST_CASE("stage 1: losses are finite, logged, and runs are bit-reproducible") {
  std::vector<audio::AudioClip> clips = audio::toy_corpus(3, 100);
  config::TrainConfig cfg = tiny_codec_cfg();

  std::vector<int64_t> sink_steps;
  train::TrainResult a = train::train_codec(
      cfg, clips, nullptr,
      [&](int64_t s, const ckpt::Checkpoint&) { sink_steps.push_back(s); });
  REQUIRE(a.log.size() == 2);
  CHECK(a.log[0].step == 1);
  CHECK(a.log[1].step == 2);
  CHECK(std::isfinite(a.log[0].loss));
  CHECK(std::isfinite(a.log[1].loss));
  CHECK(a.log[0].lr == doctest::Approx(cfg.lr));
  CHECK(sink_steps == std::vector<int64_t>{2});

  std::string text = train::log_to_text(a.log);
  CHECK(text.find("1\t") == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);

  // Identical seed and config reproduce the checkpoint byte for byte.
  train::TrainResult b = train::train_codec(cfg, clips);
  CHECK(ckpt_bytes(a.checkpoint, "t_run_a.bin") ==
        ckpt_bytes(b.checkpoint, "t_run_b.bin"));
  CHECK(a.log[1].loss == b.log[1].loss);

  // A different seed trains differently.
  config::TrainConfig other = cfg;
  other.seed = 10;
  train::TrainResult c = train::train_codec(other, clips);
  CHECK(ckpt_bytes(c.checkpoint, "t_run_c.bin") != file_bytes("t_run_a.bin"));
}

TEST_CASE("stage 1: resume continues the interrupted run bit-exactly") {
  std::vector<audio::AudioClip> clips = audio::toy_corpus(3, 100);
  config::TrainConfig cfg = tiny_codec_cfg();
  cfg.steps = 4;

  train::TrainResult whole = train::train_codec(cfg, clips);
  REQUIRE(whole.log.size() == 4);

  config::TrainConfig half = cfg;
  half.steps = 2;
  train::TrainResult first = train::train_codec(half, clips);
  train::TrainResult second = train::train_codec(cfg, clips, &first.checkpoint);
  REQUIRE(second.log.size() == 2);
  CHECK(second.log[0].step == 3);
  CHECK(second.log[1].step == 4);

  // The very next loss after resume, and everything after it, matches the
  // uninterrupted run bit for bit.
  CHECK(second.log[0].loss == whole.log[2].loss);
  CHECK(second.log[1].loss == whole.log[3].loss);
  CHECK(ckpt_bytes(whole.checkpoint, "t_whole.bin") ==
        ckpt_bytes(second.checkpoint, "t_second.bin"));

  // Resuming a finished run is refused.
  CHECK_THROWS(train::train_codec(cfg, clips, &whole.checkpoint));
}

TEST_CASE("stage 1: input validation") {
  std::vector<audio::AudioClip> clips = audio::toy_corpus(1, 100);
  config::TrainConfig cfg = tiny_codec_cfg();

  config::TrainConfig wrong_stage = cfg;
  wrong_stage.stage = "diffusion";
  CHECK_THROWS(train::train_codec(wrong_stage, clips));

  CHECK_THROWS(train::train_codec(cfg, {}));  // no clips

  std::vector<audio::AudioClip> shorty(1);
  shorty[0].sample_rate = 48000;
  shorty[0].samples.assign(1000, 0.1f);
  CHECK_THROWS(train::train_codec(cfg, shorty));  // shorter than seq_len

  std::vector<audio::AudioClip> wrong_rate = audio::toy_corpus(1, 100);
  wrong_rate[0].sample_rate = 16000;
  CHECK_THROWS(train::train_codec(cfg, wrong_rate));

  config::TrainConfig offgrid = cfg;
  offgrid.seq_len = 4608;  // multiple of the hop, but off the latent grid
  CHECK_THROWS_WITH_AS(train::train_codec(offgrid, clips),
                       doctest::Contains("multiple of"), std::runtime_error);
}

TEST_CASE("stage 2: trains on frozen codec latents and resumes bit-exactly") {
  std::vector<audio::AudioClip> clips = audio::toy_corpus(3, 100);
  train::TrainResult codec_run = train::train_codec(tiny_codec_cfg(), clips);
  const ckpt::Checkpoint& codec_ckpt = codec_run.checkpoint;

  config::TrainConfig cfg = tiny_diffusion_cfg();
  train::TrainResult a = train::train_diffusion(cfg, clips, codec_ckpt);
  REQUIRE(a.log.size() == 2);
  CHECK(std::isfinite(a.log[0].loss));
  CHECK(std::isfinite(a.log[1].loss));

  train::TrainResult b = train::train_diffusion(cfg, clips, codec_ckpt);
  CHECK(ckpt_bytes(a.checkpoint, "t_dif_a.bin") ==
        ckpt_bytes(b.checkpoint, "t_dif_b.bin"));

  // Interrupt-and-resume matches the uninterrupted run.
  config::TrainConfig four = cfg;
  four.steps = 4;
  train::TrainResult whole = train::train_diffusion(four, clips, codec_ckpt);
  train::TrainResult resumed =
      train::train_diffusion(four, clips, codec_ckpt, &a.checkpoint);
  CHECK(resumed.log[0].step == 3);
  CHECK(resumed.log[0].loss == whole.log[2].loss);
  CHECK(resumed.log[1].loss == whole.log[3].loss);
  CHECK(ckpt_bytes(whole.checkpoint, "t_dif_whole.bin") ==
        ckpt_bytes(resumed.checkpoint, "t_dif_resumed.bin"));
}

TEST_CASE("stage 2: requires a stage-1 checkpoint and an on-grid window") {
  std::vector<audio::AudioClip> clips = audio::toy_corpus(3, 100);
  train::TrainResult codec_run = train::train_codec(tiny_codec_cfg(), clips);

  config::TrainConfig cfg = tiny_diffusion_cfg();
  train::TrainResult dif = train::train_diffusion(cfg, clips, codec_run.checkpoint);

  // A stage-2 checkpoint is not a codec checkpoint.
  CHECK_THROWS_WITH_AS(
      train::train_diffusion(cfg, clips, dif.checkpoint),
      doctest::Contains("needs a codec checkpoint"), std::runtime_error);

  // The window must divide down to the estimator grid.
  config::TrainConfig offgrid = cfg;
  offgrid.seq_len = 2048;
  CHECK_THROWS(train::train_diffusion(offgrid, clips, codec_run.checkpoint));

  // Model mismatch between config and the codec checkpoint is refused.
  config::TrainConfig wrong_model = cfg;
  wrong_model.model = "full";
  CHECK_THROWS(train::train_diffusion(wrong_model, clips, codec_run.checkpoint));
}

TEST_CASE("restoration bundle rebuilds from a stage-2 checkpoint and runs") {
  std::vector<audio::AudioClip> clips = audio::toy_corpus(2, 100);
  train::TrainResult codec_run = train::train_codec(tiny_codec_cfg(), clips);
  train::TrainResult dif =
      train::train_diffusion(tiny_diffusion_cfg(), clips, codec_run.checkpoint);

  // A stage-1 checkpoint cannot feed restoration.
  CHECK_THROWS(train::bundle_from_checkpoint(codec_run.checkpoint));

  train::RestoreBundle bundle = train::bundle_from_checkpoint(dif.checkpoint);
  CHECK(bundle.schedule.T == 50);

  // One restoration unit of audio (hop * downsample * estimator grid).
  std::vector<float> wave(clips[0].samples.begin(), clips[0].samples.begin() + 4096);
  Tensor x = Tensor::from_data({1, 1, 4096}, wave);
  Pcg32 rng(21);
  Tensor y = diffusion::restore(x, bundle.codec, bundle.unet, bundle.schedule, rng);
  REQUIRE(y.shape() == std::vector<int64_t>{1, 1, 4096});
  for (float v : y.data()) {
    REQUIRE(std::isfinite(v));
    REQUIRE(std::abs(v) <= 1.0f);
  }

  // Off-grid lengths are refused with padding guidance.
  Tensor bad = Tensor::from_data({1, 1, 4000}, std::vector<float>(4000, 0.1f));
  CHECK_THROWS_WITH_AS(
      diffusion::restore(bad, bundle.codec, bundle.unet, bundle.schedule, rng),
      doctest::Contains("pad"), std::runtime_error);

  // The rebuilt codec alone round-trips a window deterministically.
  codec::Codec codec2 = train::codec_from_checkpoint(dif.checkpoint);
  nn::TrainContext ctx;
  ctx.training = false;
  codec::Codec::ForwardOut out = bundle.codec.forward(x, ctx);
  codec::Codec::ForwardOut out2 = codec2.forward(x, ctx);
  CHECK(out.x_hat.data() == out2.x_hat.data());
}
