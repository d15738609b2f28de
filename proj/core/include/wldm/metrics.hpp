#pragma once

#include <string>
#include <vector>

namespace wldm::metrics {

// ---------------------------------------------------------------------------
// Log-spectral distance: mean over frames of the root-mean-square (over bins)
// log10 power ratio, with power spectra floored before the ratio.
// ---------------------------------------------------------------------------
struct LsdConfig {
  int n_fft = 2048;
  int hop = 512;
  double power_floor = 1e-10;
};

double lsd(const std::vector<float>& reference, const std::vector<float>& estimate,
           const LsdConfig& cfg = {});

// ---------------------------------------------------------------------------
// Short-time objective intelligibility, following the metric's published
// definition: resample to 10 kHz, drop frames 40 dB below the loudest,
// decompose into 15 one-third-octave bands from 150 Hz (256-sample frames,
// 50% overlap, zero-padded 512-point FFT), then average the clipped,
// gain-normalized correlation of 384 ms band envelopes.
// ---------------------------------------------------------------------------
struct StoiConfig {
  int analysis_rate = 10000;
  int frame_len = 256;
  int hop = 128;
  int fft_size = 512;
  int n_bands = 15;
  double min_center_freq = 150.0;
  int segment_frames = 30;   ///< 384 ms at the analysis rate
  double beta_db = -15.0;    ///< lower signal-to-distortion clipping bound
  double dyn_range_db = 40.0;  ///< silent-frame removal threshold
};

double stoi(const std::vector<float>& reference, const std::vector<float>& estimate,
            int sample_rate, const StoiConfig& cfg = {});

/// Windowed-sinc polyphase resampler (Blackman window, per-phase DC
/// normalization). Exposed for testing and reuse by evaluation paths.
std::vector<float> resample(const std::vector<float>& x, int fs_in, int fs_out);

// ---------------------------------------------------------------------------
// Batch evaluation and its plain-text report. Format, one record per line,
// tab-separated:   file\t<path>\t<lsd>\t<stoi>
// followed by       summary\t<mean_lsd>\t<mean_stoi>
// ---------------------------------------------------------------------------
struct EvalPair {
  std::string path;
  std::vector<float> reference;
  std::vector<float> estimate;
  int sample_rate = 0;
};

struct FileMetrics {
  std::string path;
  double lsd = 0.0;
  double stoi = 0.0;
};

struct EvalReport {
  std::vector<FileMetrics> files;
  double mean_lsd = 0.0;
  double mean_stoi = 0.0;

  std::string to_text() const;
  static EvalReport from_text(const std::string& text);
};

EvalReport evaluate_set(const std::vector<EvalPair>& pairs, const LsdConfig& lsd_cfg = {},
                        const StoiConfig& stoi_cfg = {});

}  // namespace wldm::metrics
