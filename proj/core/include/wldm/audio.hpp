#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wldm/rng.hpp"

namespace wldm::audio {

/// Mono waveform with samples in [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = 48000;
};

/// Reads a RIFF/WAVE file holding 16-bit PCM or 32-bit IEEE float samples.
/// Multi-channel files contribute their first channel only. PCM16 values
/// decode as v / 32768; float samples are clamped into [-1, 1]. Throws on a
/// malformed header or any other codec.
AudioClip load_wav(const std::string& path);

/// Writes a mono 16-bit PCM RIFF/WAVE file. Samples are clamped to [-1, 1]
/// and quantized by rounding v * 32768, so a save/load round trip reproduces
/// every sample within 1/32768.
void save_wav(const AudioClip& clip, const std::string& path);

/// Deterministic synthetic desk corpus: each clip is a mixture of three
/// sinusoids with random frequencies and amplitudes plus short band-limited
/// noise bursts, peak-normalized to 0.5. Clips are 49,152 samples of 48 kHz
/// audio (1.024 s), a length that divides cleanly through every analysis and
/// resampling grid in the system.
std::vector<AudioClip> toy_corpus(int n_clips, uint64_t seed);

}  // namespace wldm::audio
