#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace wldm::config {

/// Every knob of a training run. Defaults are the full-scale stage-1 recipe;
/// `defaults_codec()` / `defaults_diffusion()` return the two stages' presets
/// and `desk_*` variants shrink them to laptop scale for tests and demos.
struct TrainConfig {
  std::string stage = "codec";  ///< "codec" | "diffusion"
  int64_t steps = 250000;
  int64_t batch_size = 16;
  int64_t seq_len = 32768;      ///< training crop, in samples

  // Optimizer.
  float lr = 2e-4f;
  float beta1 = 0.8f;
  float beta2 = 0.99f;
  float weight_decay = 0.0f;    ///< > 0 selects decoupled (AdamW) decay
  float adam_eps = 1e-8f;

  // Stepped exponential LR decay.
  float lr_gamma = 0.998f;
  int64_t lr_interval = 2000;

  // Diffusion schedule (stage 2).
  int diffusion_steps = 1000;   ///< T
  float beta_start = 1e-4f;
  float beta_end = 0.02f;

  // Degradation sampled during stage-2 training.
  int mask_ms = 250;

  // Bookkeeping.
  uint64_t seed = 0;
  int64_t checkpoint_every = 10000;
  std::string model = "full";  ///< "full" | "desk": model-size preset

  static TrainConfig defaults_codec();
  static TrainConfig defaults_diffusion();
  static TrainConfig desk_codec();
  static TrainConfig desk_diffusion();

  /// Throws unless every quantity is positive, batch >= 1, and enums are valid.
  void validate() const;
};

/// Parses a plain-text config document: one `key = value` pair per line,
/// `#` starts a comment, blank lines ignored. Keys are the TrainConfig field
/// names. Returns the parsed map; unknown keys are an error when applied.
std::map<std::string, std::string> parse_kv(const std::string& text);

/// Applies parsed keys onto a config (file form). Unknown keys or unparsable
/// values are errors naming the key.
void apply_kv(TrainConfig& cfg, const std::map<std::string, std::string>& kv);

/// Reads a config file and applies it over `base`.
TrainConfig load_file(const std::string& path, const TrainConfig& base);

/// Serializes every field as `key = value` lines (the same form parse_kv
/// reads), so configs round-trip.
std::string to_text(const TrainConfig& cfg);

}  // namespace wldm::config
