#include "wldm/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "wldm/common.hpp"

namespace wldm::audio {

namespace {

constexpr double kPi = 3.14159265358979323846;

uint16_t read_u16(const std::vector<char>& b, size_t off) {
  uint16_t v;
  std::memcpy(&v, b.data() + off, 2);
  return v;
}

uint32_t read_u32(const std::vector<char>& b, size_t off) {
  uint32_t v;
  std::memcpy(&v, b.data() + off, 4);
  return v;
}

void append_u16(std::vector<char>& b, uint16_t v) {
  char c[2];
  std::memcpy(c, &v, 2);
  b.insert(b.end(), c, c + 2);
}

void append_u32(std::vector<char>& b, uint32_t v) {
  char c[4];
  std::memcpy(c, &v, 4);
  b.insert(b.end(), c, c + 4);
}

}  // namespace

AudioClip load_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  WLDM_CHECK(in.good(), "cannot open wav file: " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  WLDM_CHECK(bytes.size() >= 12, "wav file too short for a RIFF header: " + path);
  WLDM_CHECK(std::memcmp(bytes.data(), "RIFF", 4) == 0,
             "not a RIFF file: " + path);
  WLDM_CHECK(std::memcmp(bytes.data() + 8, "WAVE", 4) == 0,
             "RIFF file is not WAVE: " + path);

  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  size_t data_off = 0, data_len = 0;

  size_t off = 12;
  while (off + 8 <= bytes.size()) {
    char id[5] = {bytes[off], bytes[off + 1], bytes[off + 2], bytes[off + 3], 0};
    uint32_t len = read_u32(bytes, off + 4);
    size_t body = off + 8;
    WLDM_CHECK(body + len <= bytes.size(),
               std::string("truncated '") + id + "' chunk in " + path);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      WLDM_CHECK(len >= 16, "fmt chunk too short in " + path);
      format = read_u16(bytes, body);
      channels = read_u16(bytes, body + 2);
      sample_rate = read_u32(bytes, body + 4);
      bits = read_u16(bytes, body + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data_off = body;
      data_len = len;
    }
    off = body + len + (len & 1);  // chunks are word-aligned
  }
  WLDM_CHECK(have_fmt, "wav file has no fmt chunk: " + path);
  WLDM_CHECK(data_off != 0, "wav file has no data chunk: " + path);
  WLDM_CHECK(channels >= 1, "wav file declares zero channels: " + path);
  WLDM_CHECK(sample_rate > 0, "wav file declares zero sample rate: " + path);

  AudioClip clip;
  clip.sample_rate = static_cast<int>(sample_rate);
  if (format == 1 && bits == 16) {
    size_t frame_bytes = static_cast<size_t>(channels) * 2;
    size_t n = data_len / frame_bytes;
    clip.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      int16_t v;
      std::memcpy(&v, bytes.data() + data_off + i * frame_bytes, 2);
      clip.samples[i] = static_cast<float>(v) / 32768.0f;
    }
  } else if (format == 3 && bits == 32) {
    size_t frame_bytes = static_cast<size_t>(channels) * 4;
    size_t n = data_len / frame_bytes;
    clip.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      float v;
      std::memcpy(&v, bytes.data() + data_off + i * frame_bytes, 4);
      clip.samples[i] = std::clamp(v, -1.0f, 1.0f);
    }
  } else {
    WLDM_CHECK(false, "unsupported wav codec (format " + std::to_string(format) +
                          ", " + std::to_string(bits) + " bits) in " + path +
                          "; only PCM16 and float32 are readable");
  }
  return clip;
}

void save_wav(const AudioClip& clip, const std::string& path) {
  WLDM_CHECK(clip.sample_rate > 0, "clip sample rate must be positive");
  uint32_t n = static_cast<uint32_t>(clip.samples.size());
  uint32_t sr = static_cast<uint32_t>(clip.sample_rate);

  std::vector<char> b;
  b.reserve(44 + 2 * n);
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  append_u32(b, 36 + 2 * n);
  b.insert(b.end(), {'W', 'A', 'V', 'E'});
  b.insert(b.end(), {'f', 'm', 't', ' '});
  append_u32(b, 16);
  append_u16(b, 1);   // PCM
  append_u16(b, 1);   // mono
  append_u32(b, sr);
  append_u32(b, sr * 2);  // byte rate
  append_u16(b, 2);   // block align
  append_u16(b, 16);  // bits
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  append_u32(b, 2 * n);
  for (float s : clip.samples) {
    double v = std::clamp(static_cast<double>(s), -1.0, 1.0);
    long q = std::lround(v * 32768.0);
    q = std::clamp(q, -32768L, 32767L);
    append_u16(b, static_cast<uint16_t>(static_cast<int16_t>(q)));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  WLDM_CHECK(out.good(), "cannot open wav file for writing: " + path);
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
  WLDM_CHECK(out.good(), "failed writing wav file: " + path);
}

std::vector<AudioClip> toy_corpus(int n_clips, uint64_t seed) {
  WLDM_CHECK(n_clips > 0, "corpus size must be positive");
  const int sr = 48000;
  const int64_t n = 49152;
  Pcg32 rng(seed);
  std::vector<AudioClip> clips;
  clips.reserve(static_cast<size_t>(n_clips));
  for (int c = 0; c < n_clips; ++c) {
    AudioClip clip;
    clip.sample_rate = sr;
    clip.samples.assign(static_cast<size_t>(n), 0.0f);

    // Three tones with random frequency, amplitude, and phase.
    for (int k = 0; k < 3; ++k) {
      double f = rng.uniform(200.0f, 4000.0f);
      double a = rng.uniform(0.2f, 1.0f);
      double phi = rng.uniform(0.0f, static_cast<float>(2.0 * kPi));
      for (int64_t i = 0; i < n; ++i) {
        clip.samples[static_cast<size_t>(i)] += static_cast<float>(
            a * std::sin(2.0 * kPi * f * static_cast<double>(i) / sr + phi));
      }
    }
    // Two noise bursts of ~100 ms, band-limited by a first-order smoother.
    for (int k = 0; k < 2; ++k) {
      int64_t len = 4800;
      int64_t start = static_cast<int64_t>(rng.uniform_u32(static_cast<uint32_t>(n - len)));
      float amp = rng.uniform(0.3f, 0.8f);
      float prev = 0.0f;
      for (int64_t i = 0; i < len; ++i) {
        prev = 0.7f * prev + 0.3f * rng.uniform(-1.0f, 1.0f);
        // Hann-shaped burst envelope avoids clicks at the edges.
        double env = 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(i) / len));
        clip.samples[static_cast<size_t>(start + i)] +=
            static_cast<float>(amp * env) * prev;
      }
    }
    // Peak-normalize to 0.5.
    float peak = 0.0f;
    for (float s : clip.samples) peak = std::max(peak, std::abs(s));
    if (peak > 0.0f) {
      float g = 0.5f / peak;
      for (float& s : clip.samples) s *= g;
    }
    clips.push_back(std::move(clip));
  }
  return clips;
}

}  // namespace wldm::audio
