#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wldm/audio.hpp"
#include "wldm/rng.hpp"

namespace wldm::degrade {

enum class Kind { kMask, kNoise, kBoth };

Kind kind_from_string(const std::string& s);  // "mask" | "noise" | "both"

/// Degradation recipe. The evaluation protocol exercises mask lengths
/// {0, 50, 250, 450} ms; any non-negative length that fits in the clip is
/// accepted. For noise mixing, `noise` must point at a waveform at least as
/// long as the clip; a random contiguous window of it is mixed in.
struct DegradationSpec {
  Kind kind = Kind::kMask;
  int mask_ms = 250;
  float snr_db = 10.0f;
  const std::vector<float>* noise = nullptr;
};

struct MaskInfo {
  int64_t start = 0;   ///< first zeroed sample
  int64_t length = 0;  ///< zeroed sample count (0 = no mask)
};

struct DegradeResult {
  audio::AudioClip clip;
  MaskInfo mask;
  double noise_gain = 0.0;      ///< linear gain applied to the noise window
  int64_t noise_offset = 0;     ///< window start inside the noise source
  double achieved_snr_db = 0.0; ///< equals snr_db up to float rounding
};

/// Applies the recipe: the mask zeroes `mask_ms` of audio starting at a
/// uniformly random position; noise is mixed over the whole clip at a gain
/// that makes 10*log10(P_signal / P_noise) equal the requested SNR exactly,
/// where both powers are mean squares over the clip's unmasked (active)
/// samples, measured after masking. Unmasked samples are bit-identical to the
/// input when no noise is mixed. Draw order: mask start first, then the noise
/// window offset.
DegradeResult degrade(const audio::AudioClip& clip, const DegradationSpec& spec,
                      Pcg32& rng);

}  // namespace wldm::degrade
