#include "wldm/dsp.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>

#include "op_helpers.hpp"
#include "wldm/ops.hpp"

namespace wldm::dsp {

namespace {

constexpr double kPi = 3.14159265358979323846;

/// Per-size twiddle factors: for each butterfly span `len` (2, 4, ..., n) the
/// table stores exp(-i * 2*pi * j / len) for j < len/2.
struct Twiddles {
  std::vector<double> cos_t;
  std::vector<double> sin_t;  // sin for sign = -1 (forward)
  std::vector<size_t> level_off;
};

const Twiddles& twiddles_for(size_t n) {
  static std::mutex mu;
  static std::map<size_t, std::unique_ptr<Twiddles>> cache;
  std::lock_guard<std::mutex> lk(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return *it->second;
  auto tw = std::make_unique<Twiddles>();
  size_t total = 0;
  for (size_t len = 2; len <= n; len <<= 1) total += len / 2;
  tw->cos_t.resize(total);
  tw->sin_t.resize(total);
  size_t off = 0;
  for (size_t len = 2; len <= n; len <<= 1) {
    tw->level_off.push_back(off);
    for (size_t j = 0; j < len / 2; ++j) {
      double ang = -2.0 * kPi * static_cast<double>(j) / static_cast<double>(len);
      tw->cos_t[off + j] = std::cos(ang);
      tw->sin_t[off + j] = std::sin(ang);
    }
    off += len / 2;
  }
  const Twiddles& ref = *tw;
  cache.emplace(n, std::move(tw));
  return ref;
}

}  // namespace

void fft_inplace(std::vector<double>& re, std::vector<double>& im, int sign) {
  size_t n = re.size();
  WLDM_CHECK(n == im.size() && n > 0 && (n & (n - 1)) == 0,
             "fft size must be a power of two, got " + std::to_string(n));
  if (n == 1) return;
  // Bit-reversal permutation.
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  const Twiddles& tw = twiddles_for(n);
  size_t level = 0;
  for (size_t len = 2; len <= n; len <<= 1, ++level) {
    size_t off = tw.level_off[level];
    size_t half = len / 2;
    for (size_t i = 0; i < n; i += len) {
      for (size_t j = 0; j < half; ++j) {
        double wr = tw.cos_t[off + j];
        double wi = sign < 0 ? tw.sin_t[off + j] : -tw.sin_t[off + j];
        size_t a = i + j, b = i + j + half;
        double xr = re[b] * wr - im[b] * wi;
        double xi = re[b] * wi + im[b] * wr;
        re[b] = re[a] - xr;
        im[b] = im[a] - xi;
        re[a] += xr;
        im[a] += xi;
      }
    }
  }
}

std::vector<float> hann_periodic(int n) {
  std::vector<float> w(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    w[static_cast<size_t>(i)] =
        static_cast<float>(0.5 * (1.0 - std::cos(2.0 * kPi * i / static_cast<double>(n))));
  }
  return w;
}

namespace {

/// Reflect index into [0, n) without repeating the edge sample:
/// ... x2 x1 | x0 x1 x2 ... x_{n-1} | x_{n-2} x_{n-3} ...
int64_t reflect_index(int64_t i, int64_t n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

}  // namespace

Tensor stft(const Tensor& x, int n_fft, int win_length, int hop) {
  using ops::detail::finalize;
  using ops::detail::make_node;

  WLDM_CHECK(x.ndim() == 2, "stft expects (B, N)");
  WLDM_CHECK(win_length == n_fft, "stft requires win_length == n_fft");
  WLDM_CHECK((n_fft & (n_fft - 1)) == 0, "stft n_fft must be a power of two");
  WLDM_CHECK(hop >= 1, "stft hop must be positive");
  int64_t B = x.dim(0), N = x.dim(1);
  int64_t pad = n_fft / 2;
  WLDM_CHECK(N >= 2, "stft input too short");
  int64_t padded_n = N + 2 * pad;
  int64_t frames = 1 + N / hop;
  int64_t bins = n_fft / 2 + 1;

  auto window = std::make_shared<std::vector<float>>(hann_periodic(n_fft));
  Tensor out = make_node({B, 2, bins, frames}, {x}, "stft");
  const float* px = x.data().data();
  float* po = out.data().data();

  // One padded copy per batch row, shared by all frames of that row.
  std::vector<std::vector<float>> padded(static_cast<size_t>(B));
  for (int64_t b = 0; b < B; ++b) {
    auto& p = padded[static_cast<size_t>(b)];
    p.resize(static_cast<size_t>(padded_n));
    const float* row = px + b * N;
    for (int64_t i = 0; i < padded_n; ++i) {
      p[static_cast<size_t>(i)] = row[reflect_index(i - pad, N)];
    }
  }

  parallel_for_rows(B * frames, [&](int64_t lo, int64_t hi) {
    std::vector<double> fre(static_cast<size_t>(n_fft));
    std::vector<double> fim(static_cast<size_t>(n_fft));
    for (int64_t r = lo; r < hi; ++r) {
      int64_t b = r / frames;
      int64_t t = r % frames;
      const float* src = padded[static_cast<size_t>(b)].data() + t * hop;
      const float* w = window->data();
      for (int64_t i = 0; i < n_fft; ++i) {
        fre[static_cast<size_t>(i)] = static_cast<double>(src[i]) * w[i];
        fim[static_cast<size_t>(i)] = 0.0;
      }
      fft_inplace(fre, fim, -1);
      float* re_out = po + ((b * 2 + 0) * bins) * frames;
      float* im_out = po + ((b * 2 + 1) * bins) * frames;
      for (int64_t k = 0; k < bins; ++k) {
        re_out[k * frames + t] = static_cast<float>(fre[static_cast<size_t>(k)]);
        im_out[k * frames + t] = static_cast<float>(fim[static_cast<size_t>(k)]);
      }
    }
  });

  if (out.requires_grad()) {
    TensorNode* on = out.raw();
    Tensor tx = x;
    int64_t nfft = n_fft, hop_ = hop;
    out.node()->backward_fn = [on, tx, window, B, N, pad, padded_n, frames, bins, nfft,
                               hop_]() mutable {
      const float* g = on->grad.data();
      float* gx = tx.grad().data();
      // Per batch row: rebuild each frame's sample gradient from the bin
      // gradients with an inverse-FFT identity, overlap-add the frames into
      // the padded axis, then fold the reflect padding back.
      parallel_for_rows(B, [&](int64_t blo, int64_t bhi) {
        std::vector<double> hre(static_cast<size_t>(nfft));
        std::vector<double> him(static_cast<size_t>(nfft));
        std::vector<double> gpad(static_cast<size_t>(padded_n));
        for (int64_t b = blo; b < bhi; ++b) {
          std::fill(gpad.begin(), gpad.end(), 0.0);
          const float* gre = g + ((b * 2 + 0) * bins) * frames;
          const float* gim = g + ((b * 2 + 1) * bins) * frames;
          for (int64_t t = 0; t < frames; ++t) {
            // Mirror the half spectrum into a full conjugate-symmetric one,
            // halving the interior bins so each contributes once after the
            // +i exponent transform; the real part of that transform is
            // exactly d(loss)/d(windowed sample).
            hre[0] = static_cast<double>(gre[0 * frames + t]);
            him[0] = static_cast<double>(gim[0 * frames + t]);
            hre[static_cast<size_t>(nfft / 2)] = static_cast<double>(gre[(bins - 1) * frames + t]);
            him[static_cast<size_t>(nfft / 2)] = static_cast<double>(gim[(bins - 1) * frames + t]);
            for (int64_t k = 1; k < nfft / 2; ++k) {
              double ar = 0.5 * static_cast<double>(gre[k * frames + t]);
              double ai = 0.5 * static_cast<double>(gim[k * frames + t]);
              hre[static_cast<size_t>(k)] = ar;
              him[static_cast<size_t>(k)] = ai;
              hre[static_cast<size_t>(nfft - k)] = ar;
              him[static_cast<size_t>(nfft - k)] = -ai;
            }
            fft_inplace(hre, him, +1);
            const float* w = window->data();
            double* dst = gpad.data() + t * hop_;
            for (int64_t i = 0; i < nfft; ++i) {
              dst[i] += hre[static_cast<size_t>(i)] * static_cast<double>(w[i]);
            }
          }
          float* gxrow = gx + b * N;
          for (int64_t i = 0; i < padded_n; ++i) {
            gxrow[reflect_index(i - pad, N)] += static_cast<float>(gpad[static_cast<size_t>(i)]);
          }
        }
      });
    };
  }
  finalize(out);
  return out;
}

Tensor stft_magnitude(const Tensor& x, int n_fft, int win_length, int hop) {
  Tensor s = stft(x, n_fft, win_length, hop);
  int64_t B = s.dim(0), bins = s.dim(2), frames = s.dim(3);
  Tensor re = ops::reshape(ops::narrow(s, 1, 0, 1), {B, bins, frames});
  Tensor im = ops::reshape(ops::narrow(s, 1, 1, 1), {B, bins, frames});
  Tensor power = ops::add(ops::square(re), ops::square(im));
  return ops::sqrt_op(ops::add_scalar(power, 1e-12f));
}

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

std::vector<float> mel_filterbank(int n_mel, int n_fft, float sample_rate,
                                  float fmin, float fmax) {
  int bins = n_fft / 2 + 1;
  double mel_lo = hz_to_mel(fmin);
  double mel_hi = hz_to_mel(fmax);
  std::vector<double> edges(static_cast<size_t>(n_mel) + 2);
  for (int j = 0; j < n_mel + 2; ++j) {
    edges[static_cast<size_t>(j)] =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * j / static_cast<double>(n_mel + 1));
  }
  std::vector<float> fb(static_cast<size_t>(n_mel) * static_cast<size_t>(bins), 0.0f);
  for (int m = 0; m < n_mel; ++m) {
    double f_lo = edges[static_cast<size_t>(m)];
    double f_c = edges[static_cast<size_t>(m) + 1];
    double f_hi = edges[static_cast<size_t>(m) + 2];
    bool any = false;
    for (int k = 0; k < bins; ++k) {
      double f = static_cast<double>(k) * sample_rate / static_cast<double>(n_fft);
      double up = (f - f_lo) / (f_c - f_lo);
      double down = (f_hi - f) / (f_hi - f_c);
      double w = std::min(up, down);
      if (w > 0.0) {
        fb[static_cast<size_t>(m) * static_cast<size_t>(bins) + static_cast<size_t>(k)] =
            static_cast<float>(w);
        any = true;
      }
    }
    WLDM_CHECK(any, "mel filter " + std::to_string(m) +
                        " is empty; reduce mel band count or raise the FFT size");
  }
  return fb;
}

Tensor log_mel(const Tensor& magnitude, const std::vector<float>& filterbank,
               int n_mel, float floor_val) {
  WLDM_CHECK(magnitude.ndim() == 3, "log_mel expects (B, bins, frames)");
  int64_t B = magnitude.dim(0), bins = magnitude.dim(1);
  WLDM_CHECK(static_cast<int64_t>(filterbank.size()) == n_mel * bins,
             "log_mel filterbank size mismatch");
  // Tile the constant filterbank across the batch so the batched matmul
  // applies it per clip.
  std::vector<float> tiled(static_cast<size_t>(B) * filterbank.size());
  for (int64_t b = 0; b < B; ++b) {
    std::copy(filterbank.begin(), filterbank.end(), tiled.begin() + b * n_mel * bins);
  }
  Tensor fb = Tensor::from_data({B, n_mel, bins}, std::move(tiled));
  Tensor mel = ops::matmul(fb, magnitude);
  return ops::log_op(ops::clamp_min(mel, floor_val));
}

void stft_magnitude_data(const std::vector<float>& x, int n_fft, int hop,
                         std::vector<double>& mag, int& bins, int& frames) {
  WLDM_CHECK((n_fft & (n_fft - 1)) == 0, "stft n_fft must be a power of two");
  int64_t N = static_cast<int64_t>(x.size());
  WLDM_CHECK(N >= 2, "stft input too short");
  int64_t pad = n_fft / 2;
  int64_t padded_n = N + 2 * pad;
  frames = static_cast<int>(1 + N / hop);
  bins = n_fft / 2 + 1;
  std::vector<float> window = hann_periodic(n_fft);
  std::vector<float> padded(static_cast<size_t>(padded_n));
  for (int64_t i = 0; i < padded_n; ++i) {
    padded[static_cast<size_t>(i)] = x[static_cast<size_t>(reflect_index(i - pad, N))];
  }
  mag.assign(static_cast<size_t>(bins) * static_cast<size_t>(frames), 0.0);
  std::vector<double> fre(static_cast<size_t>(n_fft));
  std::vector<double> fim(static_cast<size_t>(n_fft));
  for (int t = 0; t < frames; ++t) {
    const float* src = padded.data() + static_cast<int64_t>(t) * hop;
    for (int i = 0; i < n_fft; ++i) {
      fre[static_cast<size_t>(i)] =
          static_cast<double>(src[i]) * static_cast<double>(window[static_cast<size_t>(i)]);
      fim[static_cast<size_t>(i)] = 0.0;
    }
    fft_inplace(fre, fim, -1);
    for (int k = 0; k < bins; ++k) {
      mag[static_cast<size_t>(k) * static_cast<size_t>(frames) + static_cast<size_t>(t)] =
          std::hypot(fre[static_cast<size_t>(k)], fim[static_cast<size_t>(k)]);
    }
  }
}

}  // namespace wldm::dsp
