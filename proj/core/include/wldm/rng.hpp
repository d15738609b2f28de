#pragma once

#include <cmath>
#include <cstdint>

namespace wldm {

/// PCG32 (O'Neill's pcg32_random_r) with the usual stream increment. Chosen
/// over std::mt19937 because its whole state is two u64 words, which makes
/// saving and restoring it in checkpoints trivial and keeps draws reproducible
/// across platforms.
class Pcg32 {
 public:
  explicit Pcg32(uint64_t seed = 0x853c49e6748fea9bULL, uint64_t seq = 0xda3e39cb94b95bdbULL) {
    reseed(seed, seq);
  }

  void reseed(uint64_t seed, uint64_t seq = 0xda3e39cb94b95bdbULL) {
    state_ = 0u;
    inc_ = (seq << 1u) | 1u;
    next_u32();
    state_ += seed;
    next_u32();
  }

  uint32_t next_u32() {
    uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
    uint32_t rot = static_cast<uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
  }

  /// Uniform in [0, 1) with 32-bit resolution.
  float uniform() {
    return static_cast<float>(next_u32()) * 0x1.0p-32f;
  }

  /// Uniform in [lo, hi).
  float uniform(float lo, float hi) {
    return lo + (hi - lo) * uniform();
  }

  /// Uniform integer in [0, n). Rejection-free modulo is fine here; n is tiny
  /// compared to 2^32 everywhere this is used.
  uint32_t uniform_u32(uint32_t n) {
    return next_u32() % n;
  }

  /// Standard normal via Box-Muller. Deliberately no cached spare: one draw
  /// consumes exactly two u32s, so the stream position is a pure function of
  /// the number of calls.
  float normal() {
    float u1 = uniform();
    float u2 = uniform();
    // Guard the log; u1 == 0 happens once in 2^32 draws.
    if (u1 <= 0.0f) u1 = 0x1.0p-32f;
    double r = std::sqrt(-2.0 * std::log(static_cast<double>(u1)));
    double theta = 2.0 * 3.14159265358979323846 * static_cast<double>(u2);
    return static_cast<float>(r * std::cos(theta));
  }

  uint64_t state() const { return state_; }
  uint64_t inc() const { return inc_; }
  void set_state(uint64_t state, uint64_t inc) {
    state_ = state;
    inc_ = inc;
  }

 private:
  uint64_t state_;
  uint64_t inc_;
};

}  // namespace wldm
