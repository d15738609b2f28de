#include <cmath>
#include <complex>

#include "doctest.h"
#include "test_util.hpp"
#include "wldm/dsp.hpp"
#include "wldm/ops.hpp"

using namespace wldm;
using namespace wldm::testing;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Quadratic-time reference transform, evaluated straight from the definition.
void naive_dft(const std::vector<double>& re_in, const std::vector<double>& im_in,
               std::vector<double>& re_out, std::vector<double>& im_out, int sign) {
  size_t n = re_in.size();
  re_out.assign(n, 0.0);
  im_out.assign(n, 0.0);
  for (size_t k = 0; k < n; ++k) {
    for (size_t j = 0; j < n; ++j) {
      double ang = sign * 2.0 * kPi * static_cast<double>(k * j % n) / static_cast<double>(n);
      double c = std::cos(ang), s = std::sin(ang);
      re_out[k] += re_in[j] * c - im_in[j] * s;
      im_out[k] += re_in[j] * s + im_in[j] * c;
    }
  }
}

}  // namespace

TEST_CASE("fft matches the naive transform") {
  Pcg32 rng(101);
  for (size_t n : {2u, 8u, 16u, 64u, 256u}) {
    std::vector<double> re(n), im(n);
    for (size_t i = 0; i < n; ++i) {
      re[i] = rng.uniform(-1.0f, 1.0f);
      im[i] = rng.uniform(-1.0f, 1.0f);
    }
    std::vector<double> re_ref, im_ref;
    naive_dft(re, im, re_ref, im_ref, -1);
    std::vector<double> re_f = re, im_f = im;
    dsp::fft_inplace(re_f, im_f, -1);
    double max_err = 0.0;
    for (size_t k = 0; k < n; ++k) {
      max_err = std::max(max_err, std::fabs(re_f[k] - re_ref[k]));
      max_err = std::max(max_err, std::fabs(im_f[k] - im_ref[k]));
    }
    INFO("n=" << n << " err=" << max_err);
    CHECK(max_err < 1e-9);
  }
}

TEST_CASE("fft round trip recovers the input") {
  Pcg32 rng(102);
  const size_t n = 128;
  std::vector<double> re(n), im(n);
  for (size_t i = 0; i < n; ++i) {
    re[i] = rng.uniform(-1.0f, 1.0f);
    im[i] = rng.uniform(-1.0f, 1.0f);
  }
  std::vector<double> re2 = re, im2 = im;
  dsp::fft_inplace(re2, im2, -1);
  dsp::fft_inplace(re2, im2, +1);
  for (size_t i = 0; i < n; ++i) {
    CHECK(re2[i] / static_cast<double>(n) == doctest::Approx(re[i]).epsilon(1e-10));
    CHECK(im2[i] / static_cast<double>(n) == doctest::Approx(im[i]).epsilon(1e-10));
  }
}

TEST_CASE("stft shape, sine peak, and linearity") {
  const int n_fft = 64, hop = 16;
  const int64_t N = 256;
  // Sine exactly on bin 8 of a 64-point transform.
  Tensor x = Tensor::zeros({1, N});
  for (int64_t i = 0; i < N; ++i) {
    x.data()[static_cast<size_t>(i)] =
        static_cast<float>(std::sin(2.0 * kPi * 8.0 * i / static_cast<double>(n_fft)));
  }
  Tensor s = dsp::stft(x, n_fft, n_fft, hop);
  CHECK(s.shape() == Shape{1, 2, n_fft / 2 + 1, 1 + N / hop});

  Tensor mag = dsp::stft_magnitude(x, n_fft, n_fft, hop);
  int64_t frames = mag.dim(2);
  int64_t bins = mag.dim(1);
  // Interior frame (away from padding): the peak bin must be bin 8.
  int64_t t = frames / 2;
  int64_t peak = 0;
  float best = -1.0f;
  for (int64_t k = 0; k < bins; ++k) {
    float v = mag.data()[static_cast<size_t>(k * frames + t)];
    if (v > best) {
      best = v;
      peak = k;
    }
  }
  CHECK(peak == 8);
  // A unit sine splits its amplitude between the +f and -f bins, so the peak
  // magnitude under a Hann window is window_sum / 2.
  auto w = dsp::hann_periodic(n_fft);
  double wsum = 0.0;
  for (float v : w) wsum += v;
  CHECK(best == doctest::Approx(wsum / 2.0).epsilon(1e-3));

  // Linearity: stft(a*x + b*y) = a*stft(x) + b*stft(y).
  Pcg32 rng(103);
  Tensor y = rand_tensor({1, N}, rng, -1.0f, 1.0f, false);
  Tensor lhs_in = Tensor::zeros({1, N});
  for (int64_t i = 0; i < N; ++i) {
    lhs_in.data()[static_cast<size_t>(i)] =
        2.0f * x.data()[static_cast<size_t>(i)] - 0.5f * y.data()[static_cast<size_t>(i)];
  }
  Tensor lhs = dsp::stft(lhs_in, n_fft, n_fft, hop);
  Tensor sx = dsp::stft(x, n_fft, n_fft, hop);
  Tensor sy = dsp::stft(y, n_fft, n_fft, hop);
  double max_err = 0.0;
  for (int64_t i = 0; i < lhs.numel(); ++i) {
    double want = 2.0 * sx.data()[static_cast<size_t>(i)] - 0.5 * sy.data()[static_cast<size_t>(i)];
    max_err = std::max(max_err, std::fabs(want - lhs.data()[static_cast<size_t>(i)]));
  }
  CHECK(max_err < 1e-5);
}

TEST_CASE("stft numeric path matches the autograd op") {
  Pcg32 rng(104);
  const int n_fft = 32, hop = 8;
  const int64_t N = 96;
  Tensor x = rand_tensor({1, N}, rng, -1.0f, 1.0f, false);
  Tensor mag = dsp::stft_magnitude(x, n_fft, n_fft, hop);
  std::vector<double> ref;
  int bins = 0, frames = 0;
  dsp::stft_magnitude_data(x.data(), n_fft, hop, ref, bins, frames);
  REQUIRE(static_cast<int64_t>(bins) == mag.dim(1));
  REQUIRE(static_cast<int64_t>(frames) == mag.dim(2));
  for (size_t i = 0; i < ref.size(); ++i) {
    // The tensor path adds 1e-12 under the square root; both are float-close.
    CHECK(mag.data()[i] == doctest::Approx(ref[i]).epsilon(1e-4));
  }
}

TEST_CASE("mel scale and filterbank properties") {
  CHECK(dsp::hz_to_mel(700.0) == doctest::Approx(781.17).epsilon(1e-4));
  CHECK(dsp::mel_to_hz(dsp::hz_to_mel(1234.5)) == doctest::Approx(1234.5).epsilon(1e-9));

  const int n_mel = 20, n_fft = 256;
  const float sr = 48000.0f;
  auto fb = dsp::mel_filterbank(n_mel, n_fft, sr, 0.0f, sr / 2);
  int bins = n_fft / 2 + 1;
  // Non-negative weights, every filter occupied, peak centers increasing.
  int64_t prev_peak = -1;
  for (int m = 0; m < n_mel; ++m) {
    float best = -1.0f;
    int64_t peak = -1;
    double area = 0.0;
    for (int k = 0; k < bins; ++k) {
      float v = fb[static_cast<size_t>(m * bins + k)];
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
      area += v;
      if (v > best) {
        best = v;
        peak = k;
      }
    }
    CHECK(area > 0.0);
    CHECK(peak > prev_peak);
    prev_peak = peak;
  }
  // Requesting absurd resolution must fail, not return empty filters.
  CHECK_THROWS(dsp::mel_filterbank(200, 64, sr, 0.0f, sr / 2));
}

TEST_CASE("log_mel matches composed oracle and scaling identity") {
  Pcg32 rng(105);
  const int n_fft = 64, hop = 16, n_mel = 8;
  const int64_t N = 128;
  Tensor x = rand_tensor({1, N}, rng, -0.5f, 0.5f, false);
  auto fb = dsp::mel_filterbank(n_mel, n_fft, 48000.0f, 0.0f, 24000.0f);
  Tensor mag = dsp::stft_magnitude(x, n_fft, n_fft, hop);
  Tensor lm = dsp::log_mel(mag, fb, n_mel, 1e-5f);
  int64_t bins = mag.dim(1), frames = mag.dim(2);

  // Composed oracle in double from the numeric magnitude path.
  std::vector<double> ref_mag;
  int rb = 0, rf = 0;
  dsp::stft_magnitude_data(x.data(), n_fft, hop, ref_mag, rb, rf);
  for (int m = 0; m < n_mel; ++m) {
    for (int t = 0; t < rf; ++t) {
      double acc = 0.0;
      for (int k = 0; k < rb; ++k) {
        acc += static_cast<double>(fb[static_cast<size_t>(m * rb + k)]) *
               ref_mag[static_cast<size_t>(k * rf + t)];
      }
      double want = std::log(std::max(acc, 1e-5));
      float got = lm.data()[static_cast<size_t>(m * frames + t)];
      CHECK(got == doctest::Approx(want).epsilon(5e-4));
    }
  }

  // Scaling the signal by 10 shifts log-mel by ln(10) above the floor.
  Tensor x10 = Tensor::zeros({1, N});
  for (int64_t i = 0; i < N; ++i) x10.data()[static_cast<size_t>(i)] = 10.0f * x.data()[static_cast<size_t>(i)];
  Tensor lm10 = dsp::log_mel(dsp::stft_magnitude(x10, n_fft, n_fft, hop), fb, n_mel, 1e-5f);
  int above_floor = 0;
  for (int64_t i = 0; i < lm.numel(); ++i) {
    float base = lm.data()[static_cast<size_t>(i)];
    if (base > std::log(1e-5f) + 1e-3f &&
        lm10.data()[static_cast<size_t>(i)] > std::log(1e-4f) + 1e-3f) {
      CHECK(lm10.data()[static_cast<size_t>(i)] - base == doctest::Approx(std::log(10.0)).epsilon(1e-3));
      ++above_floor;
    }
  }
  CHECK(above_floor > 0);
  (void)bins;
}
