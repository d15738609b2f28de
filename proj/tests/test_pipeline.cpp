#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "wldm/audio.hpp"
#include "wldm/checkpoint.hpp"
#include "wldm/config.hpp"
#include "wldm/degrade.hpp"
#include "wldm/nn.hpp"
#include "wldm/optim.hpp"
#include "wldm/rng.hpp"
#include "wldm/tensor.hpp"

using namespace wldm;

namespace {

void put_u16(std::vector<char>& b, uint16_t v) {
  char c[2];
  std::memcpy(c, &v, 2);
  b.insert(b.end(), c, c + 2);
}
void put_u32(std::vector<char>& b, uint32_t v) {
  char c[4];
  std::memcpy(c, &v, 4);
  b.insert(b.end(), c, c + 4);
}

/// Minimal WAV writer for tests: arbitrary format tag, bit depth, channels.
std::vector<char> wav_bytes(uint16_t format, uint16_t channels, uint32_t sr,
                            uint16_t bits, const std::vector<char>& payload) {
  std::vector<char> b;
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  put_u32(b, static_cast<uint32_t>(36 + payload.size()));
  b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(b, 16);
  put_u16(b, format);
  put_u16(b, channels);
  put_u32(b, sr);
  put_u32(b, sr * channels * bits / 8);
  put_u16(b, static_cast<uint16_t>(channels * bits / 8));
  put_u16(b, bits);
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  put_u32(b, static_cast<uint32_t>(payload.size()));
  b.insert(b.end(), payload.begin(), payload.end());
  return b;
}

void write_file(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::vector<char>((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
}

}  // namespace

// ---------------------------------------------------------------------------
// WAV I/O.
// ---------------------------------------------------------------------------

TEST_CASE("wav: pcm16 decoding convention and channel extraction") {
  // Samples 16384 -> 0.5, -16384 -> -0.5, 0 -> 0.
  std::vector<char> pcm;
  for (int16_t v : {int16_t(16384), int16_t(-16384), int16_t(0)}) put_u16(pcm, static_cast<uint16_t>(v));
  write_file("t_pcm16.wav", wav_bytes(1, 1, 48000, 16, pcm));
  audio::AudioClip c = audio::load_wav("t_pcm16.wav");
  CHECK(c.sample_rate == 48000);
  REQUIRE(c.samples.size() == 3);
  CHECK(c.samples[0] == 0.5f);
  CHECK(c.samples[1] == -0.5f);
  CHECK(c.samples[2] == 0.0f);

  // Stereo: first channel only.
  std::vector<char> stereo;
  put_u16(stereo, 16384);  // L0
  put_u16(stereo, 0);      // R0
  put_u16(stereo, static_cast<uint16_t>(int16_t(-16384)));  // L1
  put_u16(stereo, 0);      // R1
  write_file("t_stereo.wav", wav_bytes(1, 2, 16000, 16, stereo));
  audio::AudioClip s = audio::load_wav("t_stereo.wav");
  REQUIRE(s.samples.size() == 2);
  CHECK(s.samples[0] == 0.5f);
  CHECK(s.samples[1] == -0.5f);
}

TEST_CASE("wav: float32 read with clamping") {
  std::vector<char> payload;
  for (float v : {0.25f, -0.75f, 1.5f, -2.0f}) {
    char c[4];
    std::memcpy(c, &v, 4);
    payload.insert(payload.end(), c, c + 4);
  }
  write_file("t_f32.wav", wav_bytes(3, 1, 44100, 32, payload));
  audio::AudioClip c = audio::load_wav("t_f32.wav");
  REQUIRE(c.samples.size() == 4);
  CHECK(c.samples[0] == 0.25f);
  CHECK(c.samples[1] == -0.75f);
  CHECK(c.samples[2] == 1.0f);   // clamped
  CHECK(c.samples[3] == -1.0f);  // clamped
}

TEST_CASE("wav: save/load round trip within one quantization step") {
  Pcg32 rng(11);
  audio::AudioClip clip;
  clip.sample_rate = 48000;
  for (int i = 0; i < 2000; ++i) clip.samples.push_back(rng.uniform(-1.0f, 1.0f));
  clip.samples.push_back(1.0f);
  clip.samples.push_back(-1.0f);
  audio::save_wav(clip, "t_rt.wav");
  audio::AudioClip back = audio::load_wav("t_rt.wav");
  CHECK(back.sample_rate == 48000);
  REQUIRE(back.samples.size() == clip.samples.size());
  float worst = 0.0f;
  for (size_t i = 0; i < clip.samples.size(); ++i) {
    worst = std::max(worst, std::abs(back.samples[i] - clip.samples[i]));
  }
  CHECK(worst <= 1.0f / 32768.0f);

  // A second save of the loaded samples is a fixed point (quantization is
  // idempotent), so the two files are byte-identical.
  audio::save_wav(back, "t_rt2.wav");
  CHECK(read_file("t_rt.wav") == read_file("t_rt2.wav"));
}

TEST_CASE("wav: one second of silence decodes to 48000 zeros") {
  audio::AudioClip clip;
  clip.sample_rate = 48000;
  clip.samples.assign(48000, 0.0f);
  audio::save_wav(clip, "t_sil.wav");
  audio::AudioClip back = audio::load_wav("t_sil.wav");
  REQUIRE(back.samples.size() == 48000);
  for (float v : back.samples) REQUIRE(v == 0.0f);
}

TEST_CASE("wav: malformed and unsupported files are rejected") {
  write_file("t_bad1.wav", {'n', 'o', 't', 'a', 'w', 'a', 'v'});
  CHECK_THROWS(audio::load_wav("t_bad1.wav"));

  // PCM8 is not a supported codec.
  write_file("t_bad2.wav", wav_bytes(1, 1, 8000, 8, std::vector<char>(4, 0)));
  CHECK_THROWS(audio::load_wav("t_bad2.wav"));

  // Truncated data chunk: header claims more bytes than the file holds.
  std::vector<char> whole = wav_bytes(1, 1, 8000, 16, std::vector<char>(8, 0));
  whole.resize(whole.size() - 4);
  write_file("t_bad3.wav", whole);
  CHECK_THROWS(audio::load_wav("t_bad3.wav"));

  CHECK_THROWS(audio::load_wav("t_does_not_exist.wav"));
}

TEST_CASE("toy corpus: deterministic, normalized, uniform geometry") {
  std::vector<audio::AudioClip> a = audio::toy_corpus(5, 42);
  std::vector<audio::AudioClip> b = audio::toy_corpus(5, 42);
  std::vector<audio::AudioClip> c = audio::toy_corpus(5, 43);
  REQUIRE(a.size() == 5);
  bool same = true, diff = false;
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].sample_rate == 48000);
    CHECK(a[i].samples.size() == 49152);
    float peak = 0.0f;
    for (float v : a[i].samples) peak = std::max(peak, std::abs(v));
    CHECK(peak == doctest::Approx(0.5).epsilon(1e-5));
    same = same && a[i].samples == b[i].samples;
    diff = diff || a[i].samples != c[i].samples;
  }
  CHECK(same);
  CHECK(diff);
}

// ---------------------------------------------------------------------------
// Degradation.
// ---------------------------------------------------------------------------

TEST_CASE("degrade: mask zeroes the documented span and nothing else") {
  audio::AudioClip clip = audio::toy_corpus(1, 7)[0];
  degrade::DegradationSpec spec;
  spec.kind = degrade::Kind::kMask;
  spec.mask_ms = 450;
  Pcg32 rng(3);
  degrade::DegradeResult r = degrade::degrade(clip, spec, rng);
  CHECK(r.mask.length == 21600);  // 450 ms at 48 kHz
  REQUIRE(r.mask.start >= 0);
  REQUIRE(r.mask.start + r.mask.length <= static_cast<int64_t>(clip.samples.size()));
  for (int64_t i = 0; i < static_cast<int64_t>(clip.samples.size()); ++i) {
    if (i >= r.mask.start && i < r.mask.start + r.mask.length) {
      REQUIRE(r.clip.samples[static_cast<size_t>(i)] == 0.0f);
    } else {
      REQUIRE(r.clip.samples[static_cast<size_t>(i)] ==
              clip.samples[static_cast<size_t>(i)]);
    }
  }

  spec.mask_ms = 0;
  degrade::DegradeResult r0 = degrade::degrade(clip, spec, rng);
  CHECK(r0.mask.length == 0);
  CHECK(r0.clip.samples == clip.samples);

  audio::AudioClip tiny;
  tiny.sample_rate = 48000;
  tiny.samples.assign(1000, 0.1f);
  spec.mask_ms = 450;
  CHECK_THROWS(degrade::degrade(tiny, spec, rng));
}

TEST_CASE("degrade: noise lands at the requested SNR exactly") {
  audio::AudioClip clip = audio::toy_corpus(1, 8)[0];
  Pcg32 nrng(9);
  std::vector<float> noise(clip.samples.size() + 5000);
  for (auto& v : noise) v = nrng.uniform(-0.3f, 0.3f);

  degrade::DegradationSpec spec;
  spec.kind = degrade::Kind::kNoise;
  spec.snr_db = 10.0f;
  spec.noise = &noise;
  Pcg32 rng(4);
  degrade::DegradeResult r = degrade::degrade(clip, spec, rng);
  CHECK(r.mask.length == 0);

  // Oracle: recompute powers from the clip and the added part of the output.
  double p_sig = 0.0, p_add = 0.0;
  for (size_t i = 0; i < clip.samples.size(); ++i) {
    double s = clip.samples[i];
    double a = static_cast<double>(r.clip.samples[i]) - s;
    p_sig += s * s;
    p_add += a * a;
  }
  double snr = 10.0 * std::log10(p_sig / p_add);
  CHECK(std::abs(snr - 10.0) < 0.01);
  CHECK(std::abs(r.achieved_snr_db - 10.0) < 1e-9);

  // Both: mask first, then SNR over the unmasked samples only.
  spec.kind = degrade::Kind::kBoth;
  spec.mask_ms = 250;
  spec.snr_db = 6.0f;
  degrade::DegradeResult rb = degrade::degrade(clip, spec, rng);
  CHECK(rb.mask.length == 12000);
  double q_sig = 0.0, q_add = 0.0;
  for (size_t i = 0; i < clip.samples.size(); ++i) {
    int64_t ii = static_cast<int64_t>(i);
    if (ii >= rb.mask.start && ii < rb.mask.start + rb.mask.length) continue;
    double s = clip.samples[i];
    double a = static_cast<double>(rb.clip.samples[i]) - s;
    q_sig += s * s;
    q_add += a * a;
  }
  CHECK(std::abs(10.0 * std::log10(q_sig / q_add) - 6.0) < 0.01);

  // Error paths: missing or too-short or silent noise.
  spec.kind = degrade::Kind::kNoise;
  spec.noise = nullptr;
  CHECK_THROWS(degrade::degrade(clip, spec, rng));
  std::vector<float> shorty(100, 0.1f);
  spec.noise = &shorty;
  CHECK_THROWS(degrade::degrade(clip, spec, rng));
  std::vector<float> silent(noise.size(), 0.0f);
  spec.noise = &silent;
  CHECK_THROWS(degrade::degrade(clip, spec, rng));

  CHECK(degrade::kind_from_string("mask") == degrade::Kind::kMask);
  CHECK(degrade::kind_from_string("noise") == degrade::Kind::kNoise);
  CHECK(degrade::kind_from_string("both") == degrade::Kind::kBoth);
  CHECK_THROWS(degrade::kind_from_string("sparkle"));
}

// ---------------------------------------------------------------------------
// Optimizers and the LR schedule.
// ---------------------------------------------------------------------------

namespace {

/// One-parameter store holding a scalar tensor with a preset gradient.
struct ScalarParam {
  nn::ParamStore ps;
  Tensor t;
  ScalarParam(float value, float grad) {
    t = ps.add("p", Tensor::from_data({1}, {value}, true));
    t.grad()[0] = grad;
  }
};

}  // namespace

TEST_CASE("adam: zero gradient and zero state leave parameters unchanged") {
  ScalarParam p(0.7f, 0.0f);
  optim::AdamConfig cfg;
  cfg.lr = 0.1f;
  optim::Adam opt(p.ps, cfg);
  opt.step(p.ps);
  CHECK(p.t.data()[0] == 0.7f);
}

TEST_CASE("adamw: zero gradient applies exactly the decoupled decay") {
  ScalarParam p(2.0f, 0.0f);
  optim::AdamConfig cfg;
  cfg.lr = 0.1f;
  cfg.weight_decay = 0.01f;
  optim::Adam opt(p.ps, cfg);
  opt.step(p.ps);
  CHECK(p.t.data()[0] == doctest::Approx(2.0 - 0.1 * 0.01 * 2.0).epsilon(1e-7));
}

TEST_CASE("adam: first step matches the bias-corrected closed form") {
  // With m = v = 0 and one gradient g, the bias corrections cancel the
  // (1 - beta) accumulation factors exactly, so the step is lr * g/(|g|+eps).
  ScalarParam p(0.5f, 1.0f);
  optim::AdamConfig cfg;
  cfg.lr = 0.01f;
  cfg.beta1 = 0.8f;
  cfg.beta2 = 0.99f;
  cfg.eps = 1e-8f;
  optim::Adam opt(p.ps, cfg);
  opt.step(p.ps);
  double want = 0.5 - 0.01 * (1.0 / (1.0 + 1e-8));
  CHECK(p.t.data()[0] == doctest::Approx(want).epsilon(1e-6));
}

TEST_CASE("adam: two steps match a hand-unrolled recurrence") {
  float g1 = 0.3f, g2 = -1.7f, p0 = 1.25f;
  optim::AdamConfig cfg;
  cfg.lr = 0.05f;
  cfg.beta1 = 0.8f;
  cfg.beta2 = 0.99f;
  cfg.weight_decay = 0.004f;

  ScalarParam p(p0, g1);
  optim::Adam opt(p.ps, cfg);
  opt.step(p.ps);
  p.t.grad()[0] = g2;
  opt.step(p.ps);

  // Oracle in double, following the update definition independently.
  double m = 0.0, v = 0.0, x = p0;
  double gs[2] = {g1, g2};
  for (int t = 1; t <= 2; ++t) {
    double g = gs[t - 1];
    m = 0.8 * m + 0.2 * g;
    v = 0.99 * v + 0.01 * g * g;
    double mh = m / (1.0 - std::pow(0.8, t));
    double vh = v / (1.0 - std::pow(0.99, t));
    x -= cfg.lr * (mh / (std::sqrt(vh) + cfg.eps) + cfg.weight_decay * x);
  }
  CHECK(p.t.data()[0] == doctest::Approx(x).epsilon(1e-5));
  CHECK(opt.step_count() == 2);
}

TEST_CASE("lr schedule: stepped exponential decay") {
  CHECK(optim::lr_schedule(0, 2e-4f, 0.998f, 2000) == 2e-4f);
  CHECK(optim::lr_schedule(1999, 2e-4f, 0.998f, 2000) == 2e-4f);
  CHECK(optim::lr_schedule(2000, 2e-4f, 0.998f, 2000) ==
        doctest::Approx(1.996e-4).epsilon(1e-9));
  CHECK(optim::lr_schedule(4000, 2e-4f, 0.998f, 2000) ==
        doctest::Approx(2e-4 * 0.998 * 0.998).epsilon(1e-9));

  float prev = 1e9f;
  for (int64_t s = 0; s <= 10000; s += 137) {
    float lr = optim::lr_schedule(s, 2e-4f, 0.998f, 2500);
    CHECK(lr <= prev);
    CHECK(lr == optim::lr_schedule((s / 2500) * 2500, 2e-4f, 0.998f, 2500));
    prev = lr;
  }
  CHECK_THROWS(optim::lr_schedule(-1, 2e-4f, 0.998f, 2000));
  CHECK_THROWS(optim::lr_schedule(0, 2e-4f, 0.998f, 0));
}

// ---------------------------------------------------------------------------
// Checkpoints.
// ---------------------------------------------------------------------------

TEST_CASE("checkpoint: entries, u64 records, and files round-trip exactly") {
  ckpt::Checkpoint c;
  c.add("a.w", {2, 3}, {1, 2, 3, 4, 5, 6});
  c.add("a.scalar", {}, {0.25f});
  c.add_u64("meta.step", 0);
  c.add_u64("meta.big", 0xffffffffffffffffULL);
  c.add_u64("meta.mixed", 0x0123456789abcdefULL);

  CHECK(c.get_u64("meta.step") == 0);
  CHECK(c.get_u64("meta.big") == 0xffffffffffffffffULL);
  CHECK(c.get_u64("meta.mixed") == 0x0123456789abcdefULL);
  CHECK_THROWS(c.add("a.w", {1}, {0.0f}));              // duplicate
  CHECK_THROWS(c.add("bad", {2, 2}, {1.0f}));           // payload/dims mismatch
  CHECK_THROWS(c.find("missing"));

  c.save("t_ck.bin");
  ckpt::Checkpoint back = ckpt::Checkpoint::load("t_ck.bin");
  CHECK(back.version == ckpt::Checkpoint::kVersion);
  REQUIRE(back.entries.size() == c.entries.size());
  for (size_t i = 0; i < c.entries.size(); ++i) {
    CHECK(back.entries[i].name == c.entries[i].name);
    CHECK(back.entries[i].dims == c.entries[i].dims);
    CHECK(back.entries[i].data == c.entries[i].data);
  }
  CHECK(back.get_u64("meta.mixed") == 0x0123456789abcdefULL);

  // Saving the loaded copy reproduces the bytes: the format is canonical.
  back.save("t_ck2.bin");
  CHECK(read_file("t_ck.bin") == read_file("t_ck2.bin"));
}

TEST_CASE("checkpoint: corruption, truncation, and bad magic are rejected") {
  ckpt::Checkpoint c;
  c.add("w", {4}, {1, 2, 3, 4});
  c.save("t_ck3.bin");

  std::vector<char> bytes = read_file("t_ck3.bin");
  std::vector<char> flipped = bytes;
  flipped[20] = static_cast<char>(flipped[20] ^ 0x40);
  write_file("t_ck3_flip.bin", flipped);
  CHECK_THROWS(ckpt::Checkpoint::load("t_ck3_flip.bin"));

  std::vector<char> cut(bytes.begin(), bytes.end() - 3);
  write_file("t_ck3_cut.bin", cut);
  CHECK_THROWS(ckpt::Checkpoint::load("t_ck3_cut.bin"));

  std::vector<char> magic = bytes;
  magic[0] = 'X';
  write_file("t_ck3_magic.bin", magic);
  CHECK_THROWS(ckpt::Checkpoint::load("t_ck3_magic.bin"));

  CHECK_THROWS(ckpt::Checkpoint::load("t_ck_missing.bin"));
}

TEST_CASE("checkpoint: parameter, optimizer, and rng state restore bit-exactly") {
  Pcg32 rng(5);
  nn::ParamStore ps;
  Tensor w = ps.add("m.w", Tensor::from_data({3}, {0.1f, -0.2f, 0.3f}, true));
  Tensor b = ps.add("m.b", Tensor::from_data({2}, {1.5f, -2.5f}, true));

  optim::AdamConfig ocfg;
  optim::Adam opt(ps, ocfg);
  w.grad() = {0.4f, 0.5f, -0.6f};
  b.grad() = {1.0f, -1.0f};
  opt.step(ps);

  Pcg32 coord(77);
  coord.next_u32();
  coord.next_u32();
  coord.next_u32();

  ckpt::Checkpoint c;
  ckpt::put_params(c, ps);
  ckpt::put_optimizer(c, "opt", opt);
  ckpt::put_rng(c, "rng", coord);
  c.save("t_state.bin");

  ckpt::Checkpoint lc = ckpt::Checkpoint::load("t_state.bin");
  nn::ParamStore ps2;
  Tensor w2 = ps2.add("m.w", Tensor::zeros({3}, true));
  Tensor b2 = ps2.add("m.b", Tensor::zeros({2}, true));
  ckpt::get_params(lc, ps2);
  CHECK(w2.data() == w.data());
  CHECK(b2.data() == b.data());

  optim::Adam opt2(ps2, ocfg);
  ckpt::get_optimizer(lc, "opt", opt2);
  CHECK(opt2.step_count() == 1);
  CHECK(opt2.m() == opt.m());
  CHECK(opt2.v() == opt.v());

  Pcg32 coord2;
  ckpt::get_rng(lc, "rng", coord2);
  CHECK(coord2.state() == coord.state());
  CHECK(coord2.inc() == coord.inc());
  CHECK(coord2.next_u32() == coord.next_u32());

  // Shape mismatch on load is an error.
  nn::ParamStore ps3;
  ps3.add("m.w", Tensor::zeros({4}, true));
  CHECK_THROWS(ckpt::get_params(lc, ps3));
}

// ---------------------------------------------------------------------------
// Config.
// ---------------------------------------------------------------------------

TEST_CASE("config: parsing, overrides, and full-field round trip") {
  std::string text =
      "# a comment\n"
      "stage = diffusion\n"
      "\n"
      "steps=77\t\n"
      "lr = 3e-3  # trailing comment\n";
  auto kv = config::parse_kv(text);
  CHECK(kv.size() == 3);
  CHECK(kv.at("steps") == "77");

  config::TrainConfig cfg = config::TrainConfig::defaults_codec();
  config::apply_kv(cfg, kv);
  CHECK(cfg.stage == "diffusion");
  CHECK(cfg.steps == 77);
  CHECK(cfg.lr == 3e-3f);

  // Every field is addressable: serialize, mutate everything, re-apply.
  config::TrainConfig full = config::TrainConfig::desk_diffusion();
  full.seed = 123456789012345ULL;
  full.mask_ms = 450;
  full.adam_eps = 2e-8f;
  std::string round = config::to_text(full);
  config::TrainConfig back = config::TrainConfig::defaults_codec();
  config::apply_kv(back, config::parse_kv(round));
  CHECK(back.stage == full.stage);
  CHECK(back.steps == full.steps);
  CHECK(back.batch_size == full.batch_size);
  CHECK(back.seq_len == full.seq_len);
  CHECK(back.lr == full.lr);
  CHECK(back.beta1 == full.beta1);
  CHECK(back.beta2 == full.beta2);
  CHECK(back.weight_decay == full.weight_decay);
  CHECK(back.adam_eps == full.adam_eps);
  CHECK(back.lr_gamma == full.lr_gamma);
  CHECK(back.lr_interval == full.lr_interval);
  CHECK(back.diffusion_steps == full.diffusion_steps);
  CHECK(back.beta_start == full.beta_start);
  CHECK(back.beta_end == full.beta_end);
  CHECK(back.mask_ms == full.mask_ms);
  CHECK(back.seed == full.seed);
  CHECK(back.checkpoint_every == full.checkpoint_every);
  CHECK(back.model == full.model);

  CHECK_THROWS(config::parse_kv("key_without_equals\n"));
  CHECK_THROWS(config::parse_kv("a = 1\na = 2\n"));
  config::TrainConfig t2;
  CHECK_THROWS(config::apply_kv(t2, {{"unknown_key", "1"}}));
  CHECK_THROWS(config::apply_kv(t2, {{"steps", "abc"}}));
  CHECK_THROWS(config::apply_kv(t2, {{"lr", "1.5x"}}));
}

TEST_CASE("config: stage presets carry the two-stage recipe") {
  config::TrainConfig s1 = config::TrainConfig::defaults_codec();
  CHECK(s1.stage == "codec");
  CHECK(s1.steps == 250000);
  CHECK(s1.batch_size == 16);
  CHECK(s1.seq_len == 32768);
  CHECK(s1.lr == 2e-4f);
  CHECK(s1.beta1 == 0.8f);
  CHECK(s1.beta2 == 0.99f);
  CHECK(s1.lr_gamma == 0.998f);
  CHECK(s1.lr_interval == 2000);
  CHECK(s1.weight_decay == 0.0f);

  config::TrainConfig s2 = config::TrainConfig::defaults_diffusion();
  CHECK(s2.stage == "diffusion");
  CHECK(s2.seq_len == 229376);
  CHECK(s2.batch_size == 36);
  CHECK(s2.beta1 == 0.9f);
  CHECK(s2.beta2 == 0.999f);
  CHECK(s2.weight_decay == 1e-2f);
  CHECK(s2.lr_interval == 2500);

  s1.validate();
  s2.validate();
  config::TrainConfig bad = s1;
  bad.stage = "warp";
  CHECK_THROWS(bad.validate());
  bad = s1;
  bad.batch_size = 0;
  CHECK_THROWS(bad.validate());
  bad = s1;
  bad.beta_start = 0.5f;
  bad.beta_end = 0.1f;
  CHECK_THROWS(bad.validate());
}
