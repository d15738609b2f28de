#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "wldm/dsp.hpp"
#include "wldm/metrics.hpp"
#include "wldm/rng.hpp"

using namespace wldm;
namespace M = wldm::metrics;

namespace {

std::vector<float> white_noise(int64_t n, uint64_t seed, float amp = 1.0f) {
  Pcg32 rng(seed);
  std::vector<float> x(static_cast<size_t>(n));
  for (auto& v : x) v = rng.uniform(-amp, amp);
  return x;
}

std::vector<float> scaled(const std::vector<float>& x, float a) {
  std::vector<float> y(x.size());
  for (size_t i = 0; i < x.size(); ++i) y[i] = a * x[i];
  return y;
}

/// Amplitude-modulated multi-tone with a noise bed: broadband enough that all
/// third-octave bands carry fluctuating energy, modulated slowly like speech.
std::vector<float> speech_like(int64_t n, int sample_rate, uint64_t seed) {
  Pcg32 rng(seed);
  std::vector<float> x(static_cast<size_t>(n));
  const double f0[3] = {310.0, 820.0, 2300.0};
  for (int64_t i = 0; i < n; ++i) {
    double t = static_cast<double>(i) / sample_rate;
    double am = 0.75 + 0.25 * std::sin(2.0 * 3.14159265358979323846 * 4.0 * t);
    double v = 0.0;
    for (double f : f0) v += std::sin(2.0 * 3.14159265358979323846 * f * t);
    x[static_cast<size_t>(i)] =
        static_cast<float>(am * (0.25 * v + 0.1 * rng.uniform(-1.0f, 1.0f)));
  }
  return x;
}

}  // namespace

TEST_CASE("lsd: identity, amplitude scale law, swap symmetry") {
  std::vector<float> x = white_noise(4096, 11);
  CHECK(M::lsd(x, x) == 0.0);

  // Scaling the estimate by 10^(-1/2) scales power by 10^(-1), so every bin
  // contributes a log-power gap of exactly 1.
  CHECK(M::lsd(x, scaled(x, static_cast<float>(std::pow(10.0, -0.5)))) ==
        doctest::Approx(1.0).epsilon(1e-3));
  // Gain 10^(-1/4) halves the gap.
  CHECK(M::lsd(x, scaled(x, static_cast<float>(std::pow(10.0, -0.25)))) ==
        doctest::Approx(0.5).epsilon(1e-3));

  // Swapping the roles only negates the per-bin log difference.
  std::vector<float> y = white_noise(4096, 12);
  CHECK(M::lsd(x, y) == M::lsd(y, x));
  CHECK(M::lsd(x, y) > 0.0);
}

TEST_CASE("lsd: matches an independently coded double-loop oracle") {
  std::vector<float> x = white_noise(3000, 21);
  std::vector<float> y = white_noise(3000, 22);
  // Also exercise the power floor: a silent estimate pins P_est at the floor.
  std::vector<float> silent(y.size(), 0.0f);

  M::LsdConfig cfg;
  auto oracle = [&](const std::vector<float>& a, const std::vector<float>& b) {
    std::vector<double> ma, mb;
    int bins = 0, frames = 0;
    dsp::stft_magnitude_data(a, cfg.n_fft, cfg.hop, ma, bins, frames);
    dsp::stft_magnitude_data(b, cfg.n_fft, cfg.hop, mb, bins, frames);
    std::vector<double> per_frame(static_cast<size_t>(frames), 0.0);
    for (int k = 0; k < bins; ++k) {
      for (int f = 0; f < frames; ++f) {
        double pa = std::max(ma[static_cast<size_t>(k * frames + f)] *
                                 ma[static_cast<size_t>(k * frames + f)],
                             cfg.power_floor);
        double pb = std::max(mb[static_cast<size_t>(k * frames + f)] *
                                 mb[static_cast<size_t>(k * frames + f)],
                             cfg.power_floor);
        double d = std::log10(pa) - std::log10(pb);
        per_frame[static_cast<size_t>(f)] += d * d;
      }
    }
    double acc = 0.0;
    for (double s : per_frame) acc += std::sqrt(s / bins);
    return acc / frames;
  };

  CHECK(M::lsd(x, y, cfg) == doctest::Approx(oracle(x, y)).epsilon(1e-12));
  CHECK(M::lsd(x, silent, cfg) == doctest::Approx(oracle(x, silent)).epsilon(1e-12));
  CHECK(M::lsd(x, silent, cfg) > 5.0);  // floor at 1e-10 makes the gap huge
}

TEST_CASE("lsd: rejects mismatched or empty inputs") {
  std::vector<float> x = white_noise(2048, 31);
  std::vector<float> y = white_noise(2047, 32);
  CHECK_THROWS(M::lsd(x, y));
  CHECK_THROWS(M::lsd({}, {}));
}

TEST_CASE("resample: identity, DC gain, tone preservation, output length") {
  // Same-rate input is passed through untouched.
  std::vector<float> x = white_noise(100, 41);
  std::vector<float> same = M::resample(x, 16000, 16000);
  REQUIRE(same.size() == x.size());
  CHECK(same == x);

  // 48 kHz -> 10 kHz is up=5 / down=24; ceil(480 * 5 / 24) = 100 samples.
  std::vector<float> dc(480, 0.7f);
  std::vector<float> dc10 = M::resample(dc, 48000, 10000);
  REQUIRE(dc10.size() == 100);
  // Per-phase tap normalization keeps constants exact away from the edges
  // (the filter reaches 48 input samples past each side of the center).
  for (size_t j = 10; j <= 89; ++j) {
    CHECK(dc10[j] == doctest::Approx(0.7).epsilon(1e-5));
  }

  // A 440 Hz tone far below the 5 kHz cutoff survives nearly unchanged.
  const double pi2 = 2.0 * 3.14159265358979323846;
  std::vector<float> tone(4800);
  for (size_t t = 0; t < tone.size(); ++t) {
    tone[t] = static_cast<float>(std::sin(pi2 * 440.0 * static_cast<double>(t) / 48000.0));
  }
  std::vector<float> tone10 = M::resample(tone, 48000, 10000);
  REQUIRE(tone10.size() == 1000);
  double worst = 0.0;
  for (size_t j = 100; j < 900; ++j) {
    double want = std::sin(pi2 * 440.0 * static_cast<double>(j) / 10000.0);
    worst = std::max(worst, std::abs(static_cast<double>(tone10[j]) - want));
  }
  CHECK(worst < 0.01);
}

TEST_CASE("stoi: perfect estimate scores ~1 and gain changes are invisible") {
  std::vector<float> x = speech_like(10000, 10000, 51);
  double self = M::stoi(x, x, 10000);
  CHECK(self >= 0.99);

  // The per-segment energy normalization absorbs any static gain, and the
  // clipping bound scales with the reference, so a 0.5x estimate ties exactly.
  double half_gain = M::stoi(x, scaled(x, 0.5f), 10000);
  CHECK(std::abs(half_gain - self) < 1e-6);
}

TEST_CASE("stoi: uncorrelated noise scores low, short input is rejected") {
  std::vector<float> x = speech_like(10000, 10000, 61);
  std::vector<float> noise = white_noise(10000, 62, 0.5f);
  CHECK(M::stoi(x, noise, 10000) < 0.5);

  std::vector<float> tiny = speech_like(2000, 10000, 63);
  bool threw = false;
  try {
    M::stoi(tiny, tiny, 10000);
  } catch (const std::exception& e) {
    threw = true;
    CHECK(std::string(e.what()).find("too short") != std::string::npos);
  }
  CHECK(threw);

  std::vector<float> other = speech_like(9000, 10000, 64);
  CHECK_THROWS(M::stoi(x, other, 10000));  // length mismatch
}

TEST_CASE("stoi: sample rates above the analysis rate are resampled first") {
  // The same waveform content presented at 48 kHz should score like its
  // 10 kHz rendering: near-perfect against itself.
  std::vector<float> x48 = speech_like(48000, 48000, 71);
  CHECK(M::stoi(x48, x48, 48000) >= 0.99);
}

TEST_CASE("evaluate_set: per-file rows, mean aggregation, text round-trip") {
  std::vector<float> x = speech_like(10000, 10000, 81);

  M::EvalPair perfect{"clips/a.wav", x, x, 10000};
  // Gain 0.1 = 10^(-1) scales power by 10^(-2): LSD exactly 2, STOI unchanged.
  M::EvalPair attenuated{"clips/b.wav", x, scaled(x, 0.1f), 10000};

  M::EvalReport rep = M::evaluate_set({perfect, attenuated});
  REQUIRE(rep.files.size() == 2);
  CHECK(rep.files[0].path == "clips/a.wav");
  CHECK(rep.files[0].lsd == 0.0);
  CHECK(rep.files[0].stoi >= 0.99);
  CHECK(rep.files[1].lsd == doctest::Approx(2.0).epsilon(1e-3));
  CHECK(rep.mean_lsd == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(rep.mean_stoi == doctest::Approx(rep.files[0].stoi).epsilon(1e-3));

  std::string text = rep.to_text();
  M::EvalReport back = M::EvalReport::from_text(text);
  REQUIRE(back.files.size() == rep.files.size());
  for (size_t i = 0; i < rep.files.size(); ++i) {
    CHECK(back.files[i].path == rep.files[i].path);
    CHECK(back.files[i].lsd == rep.files[i].lsd);    // %.17g round-trips doubles
    CHECK(back.files[i].stoi == rep.files[i].stoi);
  }
  CHECK(back.mean_lsd == rep.mean_lsd);
  CHECK(back.mean_stoi == rep.mean_stoi);

  CHECK_THROWS(M::evaluate_set({}));
  CHECK_THROWS(M::EvalReport::from_text("file\tonly-a-file-row\t1\t1\n"));
}
