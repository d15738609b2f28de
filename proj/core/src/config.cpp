#include "wldm/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "wldm/common.hpp"

namespace wldm::config {

TrainConfig TrainConfig::defaults_codec() { return TrainConfig{}; }

TrainConfig TrainConfig::defaults_diffusion() {
  TrainConfig c;
  c.stage = "diffusion";
  c.seq_len = 229376;
  c.batch_size = 36;
  c.beta1 = 0.9f;
  c.beta2 = 0.999f;
  c.weight_decay = 1e-2f;
  c.lr_interval = 2500;
  return c;
}

TrainConfig TrainConfig::desk_codec() {
  TrainConfig c;
  c.steps = 2000;
  c.batch_size = 2;
  c.seq_len = 8192;
  c.checkpoint_every = 2000;
  c.model = "desk";
  return c;
}

TrainConfig TrainConfig::desk_diffusion() {
  TrainConfig c = defaults_diffusion();
  c.steps = 2000;
  c.batch_size = 2;
  c.seq_len = 8192;
  c.diffusion_steps = 50;
  c.checkpoint_every = 2000;
  c.model = "desk";
  return c;
}

void TrainConfig::validate() const {
  WLDM_CHECK(stage == "codec" || stage == "diffusion",
             "stage must be 'codec' or 'diffusion', got '" + stage + "'");
  WLDM_CHECK(model == "full" || model == "desk",
             "model must be 'full' or 'desk', got '" + model + "'");
  WLDM_CHECK(steps > 0, "steps must be positive");
  WLDM_CHECK(batch_size >= 1, "batch size must be at least 1");
  WLDM_CHECK(seq_len > 0, "sequence length must be positive");
  WLDM_CHECK(lr > 0.0f, "lr must be positive");
  WLDM_CHECK(beta1 >= 0.0f && beta1 < 1.0f, "beta1 must be in [0, 1)");
  WLDM_CHECK(beta2 >= 0.0f && beta2 < 1.0f, "beta2 must be in [0, 1)");
  WLDM_CHECK(weight_decay >= 0.0f, "weight decay must be non-negative");
  WLDM_CHECK(adam_eps > 0.0f, "adam eps must be positive");
  WLDM_CHECK(lr_gamma > 0.0f && lr_gamma <= 1.0f, "lr decay factor must be in (0, 1]");
  WLDM_CHECK(lr_interval > 0, "lr decay interval must be positive");
  WLDM_CHECK(diffusion_steps >= 1, "diffusion step count must be at least 1");
  WLDM_CHECK(beta_start > 0.0f && beta_start < beta_end && beta_end < 1.0f,
             "need 0 < beta_start < beta_end < 1");
  WLDM_CHECK(mask_ms >= 0, "mask length must be non-negative");
  WLDM_CHECK(checkpoint_every > 0, "checkpoint interval must be positive");
}

std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    WLDM_CHECK(eq != std::string::npos,
               "config line " + std::to_string(line_no) + " has no '=': " + line);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    WLDM_CHECK(!key.empty(), "config line " + std::to_string(line_no) + " has an empty key");
    WLDM_CHECK(kv.find(key) == kv.end(), "duplicate config key '" + key + "'");
    kv[key] = value;
  }
  return kv;
}

namespace {

int64_t to_i64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    int64_t r = std::stoll(v, &pos);
    WLDM_CHECK(pos == v.size(), "trailing characters");
    return r;
  } catch (const std::exception&) {
    WLDM_CHECK(false, "config key '" + key + "' needs an integer, got '" + v + "'");
  }
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    uint64_t r = std::stoull(v, &pos);
    WLDM_CHECK(pos == v.size(), "trailing characters");
    return r;
  } catch (const std::exception&) {
    WLDM_CHECK(false, "config key '" + key + "' needs an unsigned integer, got '" + v + "'");
  }
}

float to_f32(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    float r = std::stof(v, &pos);
    WLDM_CHECK(pos == v.size(), "trailing characters");
    return r;
  } catch (const std::exception&) {
    WLDM_CHECK(false, "config key '" + key + "' needs a number, got '" + v + "'");
  }
}

}  // namespace

void apply_kv(TrainConfig& cfg, const std::map<std::string, std::string>& kv) {
  for (const auto& [key, v] : kv) {
    if (key == "stage") cfg.stage = v;
    else if (key == "steps") cfg.steps = to_i64(key, v);
    else if (key == "batch_size") cfg.batch_size = to_i64(key, v);
    else if (key == "seq_len") cfg.seq_len = to_i64(key, v);
    else if (key == "lr") cfg.lr = to_f32(key, v);
    else if (key == "beta1") cfg.beta1 = to_f32(key, v);
    else if (key == "beta2") cfg.beta2 = to_f32(key, v);
    else if (key == "weight_decay") cfg.weight_decay = to_f32(key, v);
    else if (key == "adam_eps") cfg.adam_eps = to_f32(key, v);
    else if (key == "lr_gamma") cfg.lr_gamma = to_f32(key, v);
    else if (key == "lr_interval") cfg.lr_interval = to_i64(key, v);
    else if (key == "diffusion_steps") cfg.diffusion_steps = static_cast<int>(to_i64(key, v));
    else if (key == "beta_start") cfg.beta_start = to_f32(key, v);
    else if (key == "beta_end") cfg.beta_end = to_f32(key, v);
    else if (key == "mask_ms") cfg.mask_ms = static_cast<int>(to_i64(key, v));
    else if (key == "seed") cfg.seed = to_u64(key, v);
    else if (key == "checkpoint_every") cfg.checkpoint_every = to_i64(key, v);
    else if (key == "model") cfg.model = v;
    else WLDM_CHECK(false, "unknown config key '" + key + "'");
  }
}

TrainConfig load_file(const std::string& path, const TrainConfig& base) {
  std::ifstream in(path);
  WLDM_CHECK(in.good(), "cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  TrainConfig cfg = base;
  apply_kv(cfg, parse_kv(ss.str()));
  return cfg;
}

std::string to_text(const TrainConfig& cfg) {
  std::ostringstream out;
  char buf[64];
  auto f = [&](float v) {
    std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
    return std::string(buf);
  };
  out << "stage = " << cfg.stage << "\n";
  out << "steps = " << cfg.steps << "\n";
  out << "batch_size = " << cfg.batch_size << "\n";
  out << "seq_len = " << cfg.seq_len << "\n";
  out << "lr = " << f(cfg.lr) << "\n";
  out << "beta1 = " << f(cfg.beta1) << "\n";
  out << "beta2 = " << f(cfg.beta2) << "\n";
  out << "weight_decay = " << f(cfg.weight_decay) << "\n";
  out << "adam_eps = " << f(cfg.adam_eps) << "\n";
  out << "lr_gamma = " << f(cfg.lr_gamma) << "\n";
  out << "lr_interval = " << cfg.lr_interval << "\n";
  out << "diffusion_steps = " << cfg.diffusion_steps << "\n";
  out << "beta_start = " << f(cfg.beta_start) << "\n";
  out << "beta_end = " << f(cfg.beta_end) << "\n";
  out << "mask_ms = " << cfg.mask_ms << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "checkpoint_every = " << cfg.checkpoint_every << "\n";
  out << "model = " << cfg.model << "\n";
  return out.str();
}

}  // namespace wldm::config
