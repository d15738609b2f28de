// Command-line front end: two-stage training, speech restoration (denoising
// and inpainting), objective evaluation, checkpoint inspection, and synthetic
// corpus generation. Every subcommand takes --seed; training also reads a
// plain-text config file whose keys individual flags override.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wldm/audio.hpp"
#include "wldm/checkpoint.hpp"
#include "wldm/config.hpp"
#include "wldm/diffusion.hpp"
#include "wldm/metrics.hpp"
#include "wldm/train.hpp"

namespace fs = std::filesystem;
using namespace wldm;

namespace {

std::vector<fs::path> wav_files(const std::string& dir) {
  WLDM_CHECK(fs::is_directory(dir), "'" + dir + "' is not a directory");
  std::vector<fs::path> paths;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") paths.push_back(e.path());
  }
  std::sort(paths.begin(), paths.end());  // deterministic dataset order
  WLDM_CHECK(!paths.empty(), "no .wav files in '" + dir + "'");
  return paths;
}

std::vector<audio::AudioClip> load_dataset(const std::string& dir) {
  std::vector<audio::AudioClip> clips;
  for (const fs::path& p : wav_files(dir)) clips.push_back(audio::load_wav(p.string()));
  return clips;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  WLDM_CHECK(out.good(), "cannot open '" + path + "' for writing");
  out << text;
  WLDM_CHECK(out.good(), "failed writing '" + path + "'");
}

// Training flags shared by both stages. Each optional flag overrides the
// config-file value only when actually given on the command line.
struct TrainArgs {
  std::string data_dir, out_path, config_path, log_path, resume_path;
  bool desk = false;
  config::TrainConfig overrides;  // values parked here by CLI11
  CLI::App* cmd = nullptr;

  void add_common(CLI::App* app) {
    cmd = app;
    app->add_option("--data", data_dir, "directory of training .wav clips")->required();
    app->add_option("--out", out_path, "checkpoint output path")->required();
    app->add_option("--config", config_path, "plain-text key = value config file");
    app->add_flag("--desk", desk, "start from the laptop-scale preset instead of full scale");
    app->add_option("--log", log_path, "write the loss curve (step\\tloss\\tlr lines) here");
    app->add_option("--resume", resume_path, "continue from this checkpoint");
    app->add_option("--seed", overrides.seed, "RNG seed (full determinism contract)");
    app->add_option("--steps", overrides.steps, "total optimizer steps");
    app->add_option("--batch-size", overrides.batch_size, "windows per step");
    app->add_option("--seq-len", overrides.seq_len, "training window, in samples");
    app->add_option("--lr", overrides.lr, "base learning rate");
    app->add_option("--beta1", overrides.beta1, "Adam beta1");
    app->add_option("--beta2", overrides.beta2, "Adam beta2");
    app->add_option("--weight-decay", overrides.weight_decay, "decoupled weight decay (0 = plain Adam)");
    app->add_option("--adam-eps", overrides.adam_eps, "Adam epsilon");
    app->add_option("--lr-gamma", overrides.lr_gamma, "LR decay factor per interval");
    app->add_option("--lr-interval", overrides.lr_interval, "steps per LR decay");
    app->add_option("--checkpoint-every", overrides.checkpoint_every, "periodic checkpoint cadence");
    app->add_option("--model", overrides.model, "model-size preset: full | desk");
  }

  /// Preset < config file < explicit flags.
  config::TrainConfig resolve(const std::string& stage) const {
    config::TrainConfig cfg;
    if (stage == "codec") {
      cfg = desk ? config::TrainConfig::desk_codec() : config::TrainConfig::defaults_codec();
    } else {
      cfg = desk ? config::TrainConfig::desk_diffusion()
                 : config::TrainConfig::defaults_diffusion();
    }
    if (!config_path.empty()) cfg = config::load_file(config_path, cfg);
    auto take = [&](const char* flag, auto member) {
      if (cmd->count(flag)) cfg.*member = overrides.*member;
    };
    take("--seed", &config::TrainConfig::seed);
    take("--steps", &config::TrainConfig::steps);
    take("--batch-size", &config::TrainConfig::batch_size);
    take("--seq-len", &config::TrainConfig::seq_len);
    take("--lr", &config::TrainConfig::lr);
    take("--beta1", &config::TrainConfig::beta1);
    take("--beta2", &config::TrainConfig::beta2);
    take("--weight-decay", &config::TrainConfig::weight_decay);
    take("--adam-eps", &config::TrainConfig::adam_eps);
    take("--lr-gamma", &config::TrainConfig::lr_gamma);
    take("--lr-interval", &config::TrainConfig::lr_interval);
    take("--checkpoint-every", &config::TrainConfig::checkpoint_every);
    take("--model", &config::TrainConfig::model);
    cfg.stage = stage;
    return cfg;
  }
};

int run_training(const TrainArgs& args, const config::TrainConfig& cfg,
                 const ckpt::Checkpoint* codec_ckpt) {
  std::vector<audio::AudioClip> clips = load_dataset(args.data_dir);
  std::fprintf(stderr, "%s: %zu clips, %lld steps, batch %lld, seq %lld, seed %llu\n",
               cfg.stage.c_str(), clips.size(), static_cast<long long>(cfg.steps),
               static_cast<long long>(cfg.batch_size), static_cast<long long>(cfg.seq_len),
               static_cast<unsigned long long>(cfg.seed));

  ckpt::Checkpoint resume;
  const ckpt::Checkpoint* resume_p = nullptr;
  if (!args.resume_path.empty()) {
    resume = ckpt::Checkpoint::load(args.resume_path);
    resume_p = &resume;
  }

  train::CheckpointSink sink = [&](int64_t step, const ckpt::Checkpoint& c) {
    c.save(args.out_path);
    std::fprintf(stderr, "step %lld: checkpoint -> %s\n", static_cast<long long>(step),
                 args.out_path.c_str());
  };

  train::TrainResult result =
      codec_ckpt ? train::train_diffusion(cfg, clips, *codec_ckpt, resume_p, sink)
                 : train::train_codec(cfg, clips, resume_p, sink);

  for (size_t i = 0; i < result.log.size(); ++i) {
    const train::LogEntry& e = result.log[i];
    if (e.step % 100 == 0 || i + 1 == result.log.size() || i == 0) {
      std::fprintf(stderr, "step %lld  loss %.6g  lr %.6g\n",
                   static_cast<long long>(e.step), e.loss, e.lr);
    }
  }
  if (!args.log_path.empty()) write_text(args.log_path, train::log_to_text(result.log));
  return 0;
}

/// Pads with trailing zeros to the restoration grid, restores, and trims back,
/// so the output has exactly the input's sample count (duration preserved).
audio::AudioClip restore_clip(const audio::AudioClip& in, const train::RestoreBundle& bundle,
                              uint64_t seed) {
  WLDM_CHECK(in.sample_rate == static_cast<int>(bundle.codec.cfg.sample_rate),
             "input is " + std::to_string(in.sample_rate) + " Hz but the model runs at " +
                 std::to_string(static_cast<int>(bundle.codec.cfg.sample_rate)) +
                 " Hz; resample the file first");
  int64_t n = static_cast<int64_t>(in.samples.size());
  WLDM_CHECK(n > 0, "input clip is empty");
  int64_t unit = static_cast<int64_t>(bundle.codec.cfg.hop) * bundle.codec.cfg.down_factor *
                 (int64_t{1} << bundle.unet.cfg.stages);
  int64_t padded = (n + unit - 1) / unit * unit;
  std::vector<float> buf(static_cast<size_t>(padded), 0.0f);
  std::copy(in.samples.begin(), in.samples.end(), buf.begin());

  Pcg32 rng(seed);
  Tensor x = Tensor::from_data({1, 1, padded}, buf);
  Tensor y = diffusion::restore(x, bundle.codec, bundle.unet, bundle.schedule, rng);

  audio::AudioClip out;
  out.sample_rate = in.sample_rate;
  out.samples.assign(y.data().begin(), y.data().begin() + n);
  return out;
}

int run_enhance(const std::string& in_path, const std::string& out_path,
                const std::string& ckpt_path, uint64_t seed) {
  train::RestoreBundle bundle =
      train::bundle_from_checkpoint(ckpt::Checkpoint::load(ckpt_path));
  audio::AudioClip in = audio::load_wav(in_path);
  audio::AudioClip out = restore_clip(in, bundle, seed);
  audio::save_wav(out, out_path);
  std::fprintf(stderr, "enhanced %s -> %s (%zu samples at %d Hz)\n", in_path.c_str(),
               out_path.c_str(), out.samples.size(), out.sample_rate);
  return 0;
}

int run_inpaint(const std::string& in_path, const std::string& out_path,
                const std::string& ckpt_path, double mask_start_ms, double mask_ms,
                uint64_t seed) {
  train::RestoreBundle bundle =
      train::bundle_from_checkpoint(ckpt::Checkpoint::load(ckpt_path));
  audio::AudioClip in = audio::load_wav(in_path);
  WLDM_CHECK(mask_start_ms >= 0 && mask_ms > 0, "mask start must be >= 0 and length > 0");
  int64_t start = static_cast<int64_t>(mask_start_ms * in.sample_rate / 1000.0);
  int64_t len = static_cast<int64_t>(mask_ms * in.sample_rate / 1000.0);
  WLDM_CHECK(start + len <= static_cast<int64_t>(in.samples.size()),
             "mask (" + std::to_string(start) + " + " + std::to_string(len) +
                 " samples) runs past the end of the clip");
  std::fill(in.samples.begin() + start, in.samples.begin() + start + len, 0.0f);
  audio::AudioClip out = restore_clip(in, bundle, seed);
  audio::save_wav(out, out_path);
  std::fprintf(stderr, "inpainted %lld samples at %lld -> %s\n", static_cast<long long>(len),
               static_cast<long long>(start), out_path.c_str());
  return 0;
}

int run_evaluate(const std::string& ref, const std::string& est, const std::string& out_path) {
  std::vector<metrics::EvalPair> pairs;
  auto add_pair = [&](const std::string& name, const std::string& rpath,
                      const std::string& epath) {
    audio::AudioClip r = audio::load_wav(rpath);
    audio::AudioClip e = audio::load_wav(epath);
    WLDM_CHECK(r.sample_rate == e.sample_rate,
               "'" + name + "': reference is " + std::to_string(r.sample_rate) +
                   " Hz but estimate is " + std::to_string(e.sample_rate) + " Hz");
    pairs.push_back({name, std::move(r.samples), std::move(e.samples), r.sample_rate});
  };
  if (fs::is_directory(ref)) {
    WLDM_CHECK(fs::is_directory(est),
               "--ref is a directory, so --est must be a directory too");
    for (const fs::path& rp : wav_files(ref)) {
      fs::path ep = fs::path(est) / rp.filename();
      WLDM_CHECK(fs::exists(ep), "estimate missing for '" + rp.filename().string() + "'");
      add_pair(rp.filename().string(), rp.string(), ep.string());
    }
  } else {
    add_pair(fs::path(est).filename().string(), ref, est);
  }
  metrics::EvalReport report = metrics::evaluate_set(pairs);
  std::string text = report.to_text();
  if (out_path.empty()) {
    std::fwrite(text.data(), 1, text.size(), stdout);
  } else {
    write_text(out_path, text);
    std::fprintf(stderr, "wrote %zu file records -> %s\n", report.files.size(),
                 out_path.c_str());
  }
  return 0;
}

int run_inspect(const std::string& path) {
  ckpt::Checkpoint c = ckpt::Checkpoint::load(path);
  std::printf("version %u\n", c.version);
  if (c.contains("meta.stage")) {
    uint64_t stage = c.get_u64("meta.stage");
    std::printf("stage %s\n", stage == 0 ? "codec" : "diffusion");
  }
  if (c.contains("train.step")) {
    std::printf("step %llu\n", static_cast<unsigned long long>(c.get_u64("train.step")));
  }
  int64_t total = 0;
  for (const ckpt::Entry& e : c.entries) {
    std::string shape = "(";
    for (size_t i = 0; i < e.dims.size(); ++i) {
      if (i) shape += ", ";
      shape += std::to_string(e.dims[i]);
    }
    shape += ")";
    std::printf("%-48s %-20s %zu\n", e.name.c_str(), shape.c_str(), e.data.size());
    total += static_cast<int64_t>(e.data.size());
  }
  std::printf("entries %zu, total values %lld\n", c.entries.size(),
              static_cast<long long>(total));
  return 0;
}

int run_gen_corpus(const std::string& out_dir, int count, uint64_t seed) {
  fs::create_directories(out_dir);
  std::vector<audio::AudioClip> clips = audio::toy_corpus(count, seed);
  for (size_t i = 0; i < clips.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "clip_%02zu.wav", i);
    audio::save_wav(clips[i], (fs::path(out_dir) / name).string());
  }
  std::fprintf(stderr, "wrote %zu clips -> %s\n", clips.size(), out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wavelldm: neural audio codec + latent diffusion restoration"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  TrainArgs tc_args;
  CLI::App* tc = app.add_subcommand("train-codec", "stage 1: adversarial codec training");
  tc_args.add_common(tc);

  TrainArgs td_args;
  std::string td_codec;
  CLI::App* td = app.add_subcommand(
      "train-diffusion", "stage 2: latent denoiser training on a frozen codec");
  td_args.add_common(td);
  td->add_option("--codec", td_codec, "stage-1 checkpoint")->required();
  td->add_option("--diffusion-steps", td_args.overrides.diffusion_steps, "schedule length T");
  td->add_option("--beta-start", td_args.overrides.beta_start, "schedule beta_1");
  td->add_option("--beta-end", td_args.overrides.beta_end, "schedule beta_T");
  td->add_option("--mask-ms", td_args.overrides.mask_ms, "training mask length, ms");

  std::string e_in, e_out, e_ckpt;
  uint64_t e_seed = 0;
  CLI::App* en = app.add_subcommand("enhance", "restore a degraded recording");
  en->add_option("--in", e_in, "input .wav")->required();
  en->add_option("--out", e_out, "output .wav")->required();
  en->add_option("--checkpoint", e_ckpt, "stage-2 checkpoint")->required();
  en->add_option("--seed", e_seed, "sampler RNG seed");

  std::string i_in, i_out, i_ckpt;
  double i_start = 0, i_len = 0;
  uint64_t i_seed = 0;
  CLI::App* ip = app.add_subcommand("inpaint", "zero a span and regenerate it");
  ip->add_option("--in", i_in, "input .wav")->required();
  ip->add_option("--out", i_out, "output .wav")->required();
  ip->add_option("--checkpoint", i_ckpt, "stage-2 checkpoint")->required();
  ip->add_option("--mask-start-ms", i_start, "mask start, ms")->required();
  ip->add_option("--mask-ms", i_len, "mask length, ms")->required();
  ip->add_option("--seed", i_seed, "sampler RNG seed");

  std::string v_ref, v_est, v_out;
  CLI::App* ev = app.add_subcommand(
      "evaluate", "LSD/STOI report for reference/estimate pairs (files or directories)");
  ev->add_option("--ref", v_ref, "reference .wav or directory")->required();
  ev->add_option("--est", v_est, "estimate .wav or directory")->required();
  ev->add_option("--out", v_out, "report path (stdout when omitted)");

  std::string k_path;
  CLI::App* ik = app.add_subcommand("inspect-checkpoint", "list checkpoint entries and shapes");
  ik->add_option("checkpoint", k_path, "checkpoint file")->required();

  std::string g_out;
  int g_count = 10;
  uint64_t g_seed = 0;
  CLI::App* gc = app.add_subcommand("gen-corpus", "write the synthetic training corpus");
  gc->add_option("--out", g_out, "output directory")->required();
  gc->add_option("--count", g_count, "number of clips");
  gc->add_option("--seed", g_seed, "corpus RNG seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*tc) return run_training(tc_args, tc_args.resolve("codec"), nullptr);
    if (*td) {
      ckpt::Checkpoint codec_ckpt = ckpt::Checkpoint::load(td_codec);
      config::TrainConfig cfg = td_args.resolve("diffusion");
      auto take = [&](const char* flag, auto member) {
        if (td->count(flag)) cfg.*member = td_args.overrides.*member;
      };
      take("--diffusion-steps", &config::TrainConfig::diffusion_steps);
      take("--beta-start", &config::TrainConfig::beta_start);
      take("--beta-end", &config::TrainConfig::beta_end);
      take("--mask-ms", &config::TrainConfig::mask_ms);
      return run_training(td_args, cfg, &codec_ckpt);
    }
    if (*en) return run_enhance(e_in, e_out, e_ckpt, e_seed);
    if (*ip) return run_inpaint(i_in, i_out, i_ckpt, i_start, i_len, i_seed);
    if (*ev) return run_evaluate(v_ref, v_est, v_out);
    if (*ik) return run_inspect(k_path);
    if (*gc) return run_gen_corpus(g_out, g_count, g_seed);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 0;
}
