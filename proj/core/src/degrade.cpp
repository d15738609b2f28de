#include "wldm/degrade.hpp"

#include <cmath>

#include "wldm/common.hpp"

namespace wldm::degrade {

Kind kind_from_string(const std::string& s) {
  if (s == "mask") return Kind::kMask;
  if (s == "noise") return Kind::kNoise;
  if (s == "both") return Kind::kBoth;
  WLDM_CHECK(false, "unknown degradation kind '" + s + "' (mask | noise | both)");
}

DegradeResult degrade(const audio::AudioClip& clip, const DegradationSpec& spec,
                      Pcg32& rng) {
  int64_t n = static_cast<int64_t>(clip.samples.size());
  WLDM_CHECK(n > 0, "cannot degrade an empty clip");
  WLDM_CHECK(spec.mask_ms >= 0, "mask length must be non-negative");
  WLDM_CHECK(std::isfinite(spec.snr_db), "snr must be finite");

  DegradeResult out;
  out.clip = clip;

  bool masking = spec.kind == Kind::kMask || spec.kind == Kind::kBoth;
  bool noising = spec.kind == Kind::kNoise || spec.kind == Kind::kBoth;

  if (masking && spec.mask_ms > 0) {
    int64_t mask_len = static_cast<int64_t>(spec.mask_ms) * clip.sample_rate / 1000;
    WLDM_CHECK(mask_len <= n, "mask of " + std::to_string(mask_len) +
                                  " samples does not fit in a clip of " +
                                  std::to_string(n));
    int64_t start =
        mask_len == n
            ? 0
            : static_cast<int64_t>(rng.uniform_u32(static_cast<uint32_t>(n - mask_len + 1)));
    for (int64_t i = start; i < start + mask_len; ++i) {
      out.clip.samples[static_cast<size_t>(i)] = 0.0f;
    }
    out.mask.start = start;
    out.mask.length = mask_len;
  }

  if (noising) {
    WLDM_CHECK(spec.noise != nullptr, "noise degradation needs a noise source");
    const std::vector<float>& src = *spec.noise;
    int64_t m = static_cast<int64_t>(src.size());
    WLDM_CHECK(m >= n, "noise source (" + std::to_string(m) +
                           " samples) is shorter than the clip (" +
                           std::to_string(n) + ")");
    int64_t off =
        m == n ? 0
               : static_cast<int64_t>(rng.uniform_u32(static_cast<uint32_t>(m - n + 1)));
    out.noise_offset = off;

    // Mean squares over the active (unmasked) samples, after masking.
    double p_sig = 0.0, p_noise = 0.0;
    int64_t active = 0;
    for (int64_t i = 0; i < n; ++i) {
      if (i >= out.mask.start && i < out.mask.start + out.mask.length) continue;
      double s = out.clip.samples[static_cast<size_t>(i)];
      double v = src[static_cast<size_t>(off + i)];
      p_sig += s * s;
      p_noise += v * v;
      ++active;
    }
    WLDM_CHECK(active > 0, "clip is fully masked; SNR is undefined");
    p_sig /= static_cast<double>(active);
    p_noise /= static_cast<double>(active);
    WLDM_CHECK(p_sig > 0.0, "active signal is silent; SNR is undefined");
    WLDM_CHECK(p_noise > 0.0, "noise window is silent; SNR is undefined");

    double gain = std::sqrt(p_sig / (p_noise * std::pow(10.0, spec.snr_db / 10.0)));
    out.noise_gain = gain;
    for (int64_t i = 0; i < n; ++i) {
      out.clip.samples[static_cast<size_t>(i)] += static_cast<float>(
          gain * static_cast<double>(src[static_cast<size_t>(off + i)]));
    }
    out.achieved_snr_db = 10.0 * std::log10(p_sig / (gain * gain * p_noise));
  }

  return out;
}

}  // namespace wldm::degrade
