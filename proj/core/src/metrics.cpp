#include "wldm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "wldm/common.hpp"
#include "wldm/dsp.hpp"

namespace wldm::metrics {

namespace {

constexpr double kPi = 3.14159265358979323846;

}  // namespace

double lsd(const std::vector<float>& reference, const std::vector<float>& estimate,
           const LsdConfig& cfg) {
  WLDM_CHECK(cfg.power_floor > 0.0, "power floor must be positive");
  WLDM_CHECK(!reference.empty(), "reference signal is empty");
  WLDM_CHECK(reference.size() == estimate.size(),
             "length mismatch: reference " + std::to_string(reference.size()) +
                 " vs estimate " + std::to_string(estimate.size()));
  std::vector<double> mr, me;
  int bins = 0, frames = 0;
  dsp::stft_magnitude_data(reference, cfg.n_fft, cfg.hop, mr, bins, frames);
  dsp::stft_magnitude_data(estimate, cfg.n_fft, cfg.hop, me, bins, frames);
  double acc = 0.0;
  for (int f = 0; f < frames; ++f) {
    double frame_acc = 0.0;
    for (int k = 0; k < bins; ++k) {
      size_t i = static_cast<size_t>(k * frames + f);
      double pr = std::max(mr[i] * mr[i], cfg.power_floor);
      double pe = std::max(me[i] * me[i], cfg.power_floor);
      double d = std::log10(pr) - std::log10(pe);
      frame_acc += d * d;
    }
    acc += std::sqrt(frame_acc / static_cast<double>(bins));
  }
  return acc / static_cast<double>(frames);
}

// ---------------------------------------------------------------------------
// Resampling.
// ---------------------------------------------------------------------------

std::vector<float> resample(const std::vector<float>& x, int fs_in, int fs_out) {
  WLDM_CHECK(fs_in > 0 && fs_out > 0, "sample rates must be positive");
  if (fs_in == fs_out) return x;
  int g = std::gcd(fs_in, fs_out);
  int64_t up = fs_out / g;    // L: zero-stuffing factor
  int64_t down = fs_in / g;   // M: decimation factor

  // Linear-phase windowed sinc at the upsampled rate, cut off at the tighter
  // of the two Nyquist bounds; 10 sinc lobes per side.
  double nu_c = 0.5 / static_cast<double>(std::max(up, down));
  int64_t half = 10 * std::max(up, down);
  int64_t n_taps = 2 * half + 1;
  std::vector<double> h(static_cast<size_t>(n_taps));
  for (int64_t n = 0; n < n_taps; ++n) {
    double t = static_cast<double>(n - half);
    double sinc = t == 0.0 ? 1.0 : std::sin(2.0 * kPi * nu_c * t) / (2.0 * kPi * nu_c * t);
    double w = 0.42 - 0.5 * std::cos(2.0 * kPi * n / (n_taps - 1)) +
               0.08 * std::cos(4.0 * kPi * n / (n_taps - 1));
    h[static_cast<size_t>(n)] = 2.0 * nu_c * static_cast<double>(up) * sinc * w;
  }
  // Per-phase DC normalization: every residue class of taps modulo `up` sums
  // to exactly 1, so constants survive the rate change unchanged.
  for (int64_t r = 0; r < up; ++r) {
    double s = 0.0;
    for (int64_t n = r; n < n_taps; n += up) s += h[static_cast<size_t>(n)];
    if (s != 0.0) {
      for (int64_t n = r; n < n_taps; n += up) h[static_cast<size_t>(n)] /= s;
    }
  }

  int64_t in_len = static_cast<int64_t>(x.size());
  int64_t out_len = (in_len * up + down - 1) / down;
  std::vector<float> y(static_cast<size_t>(out_len));
  for (int64_t j = 0; j < out_len; ++j) {
    int64_t p = j * down;  // center position on the upsampled grid
    int64_t num = p - half;
    int64_t t_lo = num >= 0 ? (num + up - 1) / up : num / up;  // ceil(num / up)
    int64_t t_hi = (p + half) / up;  // floor; p + half >= 0 always
    if (t_lo < 0) t_lo = 0;
    if (t_hi >= in_len) t_hi = in_len - 1;
    double acc = 0.0;
    for (int64_t t = t_lo; t <= t_hi; ++t) {
      acc += static_cast<double>(x[static_cast<size_t>(t)]) *
             h[static_cast<size_t>(half + p - t * up)];
    }
    y[static_cast<size_t>(j)] = static_cast<float>(acc);
  }
  return y;
}

// ---------------------------------------------------------------------------
// STOI.
// ---------------------------------------------------------------------------

namespace {

/// Symmetric Hann without zero endpoints, as used by the metric's reference
/// formulation: w[k] = 0.5 (1 - cos(2 pi (k+1) / (N+1))).
std::vector<double> hann_interior(int n) {
  std::vector<double> w(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    w[static_cast<size_t>(k)] = 0.5 * (1.0 - std::cos(2.0 * kPi * (k + 1) / (n + 1)));
  }
  return w;
}

/// Drops frames whose reference energy sits more than `range_db` below the
/// loudest frame, overlap-adding the windowed survivors back into shorter
/// signals (applied to both signals with the reference's mask).
void remove_silent_frames(std::vector<double>& x, std::vector<double>& y,
                          double range_db, int frame_len, int hop) {
  std::vector<double> w = hann_interior(frame_len);
  int64_t n = static_cast<int64_t>(x.size());
  std::vector<int64_t> starts;
  for (int64_t s = 0; s + frame_len <= n; s += hop) starts.push_back(s);
  if (starts.empty()) {
    x.clear();
    y.clear();
    return;
  }
  std::vector<double> energy_db(starts.size());
  double max_db = -1e300;
  for (size_t i = 0; i < starts.size(); ++i) {
    double e = 0.0;
    for (int k = 0; k < frame_len; ++k) {
      double v = x[static_cast<size_t>(starts[i] + k)] * w[static_cast<size_t>(k)];
      e += v * v;
    }
    energy_db[i] = 10.0 * std::log10(e / frame_len + 1e-300);
    max_db = std::max(max_db, energy_db[i]);
  }
  std::vector<double> xs, ys;
  int64_t count = 0;
  for (size_t i = 0; i < starts.size(); ++i) {
    if (energy_db[i] <= max_db - range_db) continue;
    int64_t out_start = count * hop;
    if (static_cast<int64_t>(xs.size()) < out_start + frame_len) {
      xs.resize(static_cast<size_t>(out_start + frame_len), 0.0);
      ys.resize(static_cast<size_t>(out_start + frame_len), 0.0);
    }
    for (int k = 0; k < frame_len; ++k) {
      xs[static_cast<size_t>(out_start + k)] +=
          x[static_cast<size_t>(starts[i] + k)] * w[static_cast<size_t>(k)];
      ys[static_cast<size_t>(out_start + k)] +=
          y[static_cast<size_t>(starts[i] + k)] * w[static_cast<size_t>(k)];
    }
    ++count;
  }
  x = std::move(xs);
  y = std::move(ys);
}

/// One-third-octave band magnitudes: rows are bands, columns are frames.
/// Band k spans [cf 2^-1/6, cf 2^1/6) with cf = min_cf 2^(k/3), edges snapped
/// to the nearest FFT bin.
struct BandEnvelopes {
  int bands = 0;
  int frames = 0;
  std::vector<double> v;  // row-major (bands, frames)
  double at(int b, int f) const { return v[static_cast<size_t>(b * frames + f)]; }
};

BandEnvelopes band_decompose(const std::vector<double>& sig, const StoiConfig& cfg) {
  int bins = cfg.fft_size / 2 + 1;
  std::vector<double> w = hann_interior(cfg.frame_len);
  std::vector<int64_t> starts;
  for (int64_t s = 0; s + cfg.frame_len <= static_cast<int64_t>(sig.size()); s += cfg.hop) {
    starts.push_back(s);
  }
  int frames = static_cast<int>(starts.size());

  // Band edge bins.
  std::vector<int> lo(static_cast<size_t>(cfg.n_bands)), hi(static_cast<size_t>(cfg.n_bands));
  double bin_hz = static_cast<double>(cfg.analysis_rate) / cfg.fft_size;
  for (int b = 0; b < cfg.n_bands; ++b) {
    double cf = cfg.min_center_freq * std::pow(2.0, b / 3.0);
    double fl = cf * std::pow(2.0, -1.0 / 6.0);
    double fh = cf * std::pow(2.0, 1.0 / 6.0);
    lo[static_cast<size_t>(b)] = static_cast<int>(std::lround(fl / bin_hz));
    hi[static_cast<size_t>(b)] = static_cast<int>(std::lround(fh / bin_hz));
    WLDM_CHECK(hi[static_cast<size_t>(b)] <= bins,
               "third-octave band exceeds the analysis bandwidth");
    WLDM_CHECK(hi[static_cast<size_t>(b)] > lo[static_cast<size_t>(b)],
               "third-octave band contains no FFT bins at this resolution");
  }

  BandEnvelopes env;
  env.bands = cfg.n_bands;
  env.frames = frames;
  env.v.assign(static_cast<size_t>(cfg.n_bands) * frames, 0.0);
  std::vector<double> re(static_cast<size_t>(cfg.fft_size));
  std::vector<double> im(static_cast<size_t>(cfg.fft_size));
  for (int f = 0; f < frames; ++f) {
    std::fill(re.begin(), re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    for (int k = 0; k < cfg.frame_len; ++k) {
      re[static_cast<size_t>(k)] =
          sig[static_cast<size_t>(starts[static_cast<size_t>(f)] + k)] *
          w[static_cast<size_t>(k)];
    }
    dsp::fft_inplace(re, im, -1);
    for (int b = 0; b < cfg.n_bands; ++b) {
      double e = 0.0;
      for (int k = lo[static_cast<size_t>(b)]; k < hi[static_cast<size_t>(b)]; ++k) {
        e += re[static_cast<size_t>(k)] * re[static_cast<size_t>(k)] +
             im[static_cast<size_t>(k)] * im[static_cast<size_t>(k)];
      }
      env.v[static_cast<size_t>(b * frames + f)] = std::sqrt(e);
    }
  }
  return env;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  double ma = std::accumulate(a.begin(), a.end(), 0.0) / a.size();
  double mb = std::accumulate(b.begin(), b.end(), 0.0) / b.size();
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double da = a[i] - ma, db = b[i] - mb;
    dot += da * db;
    na += da * da;
    nb += db * db;
  }
  double denom = std::sqrt(na) * std::sqrt(nb);
  return denom < 1e-30 ? 0.0 : dot / denom;
}

}  // namespace

double stoi(const std::vector<float>& reference, const std::vector<float>& estimate,
            int sample_rate, const StoiConfig& cfg) {
  WLDM_CHECK(reference.size() == estimate.size(),
             "length mismatch: reference " + std::to_string(reference.size()) +
                 " vs estimate " + std::to_string(estimate.size()));
  std::vector<float> rf = resample(reference, sample_rate, cfg.analysis_rate);
  std::vector<float> ef = resample(estimate, sample_rate, cfg.analysis_rate);
  std::vector<double> r(rf.begin(), rf.end());
  std::vector<double> e(ef.begin(), ef.end());

  remove_silent_frames(r, e, cfg.dyn_range_db, cfg.frame_len, cfg.hop);

  BandEnvelopes X = band_decompose(r, cfg);
  BandEnvelopes Y = band_decompose(e, cfg);
  WLDM_CHECK(X.frames >= cfg.segment_frames,
             "signal too short: " + std::to_string(X.frames) +
                 " active frames, need at least " + std::to_string(cfg.segment_frames) +
                 " (384 ms of speech-active signal)");

  double clip = std::pow(10.0, -cfg.beta_db / 20.0);
  const int N = cfg.segment_frames;
  double acc = 0.0;
  int64_t count = 0;
  std::vector<double> xs(static_cast<size_t>(N)), ys(static_cast<size_t>(N));
  for (int m = N - 1; m < X.frames; ++m) {
    for (int b = 0; b < X.bands; ++b) {
      double ex = 0.0, ey = 0.0;
      for (int k = 0; k < N; ++k) {
        double xv = X.at(b, m - N + 1 + k);
        double yv = Y.at(b, m - N + 1 + k);
        xs[static_cast<size_t>(k)] = xv;
        ys[static_cast<size_t>(k)] = yv;
        ex += xv * xv;
        ey += yv * yv;
      }
      double alpha = ey < 1e-300 ? 0.0 : std::sqrt(ex / ey);
      for (int k = 0; k < N; ++k) {
        double bound = xs[static_cast<size_t>(k)] * (1.0 + clip);
        ys[static_cast<size_t>(k)] = std::min(ys[static_cast<size_t>(k)] * alpha, bound);
      }
      acc += pearson(xs, ys);
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// Batch evaluation.
// ---------------------------------------------------------------------------

EvalReport evaluate_set(const std::vector<EvalPair>& pairs, const LsdConfig& lsd_cfg,
                        const StoiConfig& stoi_cfg) {
  WLDM_CHECK(!pairs.empty(), "evaluation set is empty");
  EvalReport rep;
  double sl = 0.0, ss = 0.0;
  for (const auto& p : pairs) {
    FileMetrics fm;
    fm.path = p.path;
    fm.lsd = lsd(p.reference, p.estimate, lsd_cfg);
    fm.stoi = stoi(p.reference, p.estimate, p.sample_rate, stoi_cfg);
    sl += fm.lsd;
    ss += fm.stoi;
    rep.files.push_back(std::move(fm));
  }
  rep.mean_lsd = sl / static_cast<double>(pairs.size());
  rep.mean_stoi = ss / static_cast<double>(pairs.size());
  return rep;
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  char buf[128];
  for (const auto& f : files) {
    std::snprintf(buf, sizeof buf, "%.17g\t%.17g", f.lsd, f.stoi);
    out << "file\t" << f.path << "\t" << buf << "\n";
  }
  std::snprintf(buf, sizeof buf, "%.17g\t%.17g", mean_lsd, mean_stoi);
  out << "summary\t" << buf << "\n";
  return out.str();
}

EvalReport EvalReport::from_text(const std::string& text) {
  EvalReport rep;
  std::istringstream in(text);
  std::string line;
  bool saw_summary = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    std::getline(ls, tag, '\t');
    if (tag == "file") {
      FileMetrics fm;
      std::string lsd_s, stoi_s;
      std::getline(ls, fm.path, '\t');
      std::getline(ls, lsd_s, '\t');
      std::getline(ls, stoi_s, '\t');
      fm.lsd = std::stod(lsd_s);
      fm.stoi = std::stod(stoi_s);
      rep.files.push_back(std::move(fm));
    } else if (tag == "summary") {
      std::string lsd_s, stoi_s;
      std::getline(ls, lsd_s, '\t');
      std::getline(ls, stoi_s, '\t');
      rep.mean_lsd = std::stod(lsd_s);
      rep.mean_stoi = std::stod(stoi_s);
      saw_summary = true;
    } else {
      WLDM_CHECK(false, "unknown report record tag '" + tag + "'");
    }
  }
  WLDM_CHECK(saw_summary, "report has no summary record");
  return rep;
}

}  // namespace wldm::metrics
