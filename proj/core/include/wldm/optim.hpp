#pragma once

#include <cstdint>
#include <vector>

#include "wldm/nn.hpp"

namespace wldm::optim {

/// Adam hyperparameters. weight_decay > 0 turns the update into AdamW:
/// decoupled decay -lr * wd * param applied alongside the Adam step, never
/// entering the moment estimates.
struct AdamConfig {
  float lr = 2e-4f;
  float beta1 = 0.8f;
  float beta2 = 0.99f;
  float eps = 1e-8f;
  float weight_decay = 0.0f;
};

/// Standard bias-corrected Adam over a parameter store. Moment buffers are
/// kept per parameter in registration order; `step_count` is the t in the
/// bias-correction terms 1 - beta^t. The whole state round-trips through
/// checkpoints for bit-exact resume.
class Adam {
 public:
  Adam(const nn::ParamStore& ps, const AdamConfig& cfg);

  /// One update from the gradients currently stored on the parameters,
  /// at learning rate `lr_now` (the config lr is a default; schedules pass
  /// the decayed value). A parameter backward never reached has a zero
  /// gradient, which leaves it unchanged under Adam and decays it under AdamW.
  void step(const nn::ParamStore& ps, float lr_now);
  void step(const nn::ParamStore& ps) { step(ps, cfg_.lr); }

  const AdamConfig& config() const { return cfg_; }
  int64_t step_count() const { return step_count_; }
  std::vector<std::vector<float>>& m() { return m_; }
  std::vector<std::vector<float>>& v() { return v_; }
  const std::vector<std::vector<float>>& m() const { return m_; }
  const std::vector<std::vector<float>>& v() const { return v_; }
  void set_step_count(int64_t t) { step_count_ = t; }

 private:
  AdamConfig cfg_;
  int64_t step_count_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

/// Stepped exponential decay: base_lr * gamma^floor(step / interval).
/// Piecewise constant, and non-increasing whenever gamma <= 1.
float lr_schedule(int64_t step, float base_lr, float gamma, int64_t interval);

}  // namespace wldm::optim
