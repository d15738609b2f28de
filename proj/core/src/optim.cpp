#include "wldm/optim.hpp"

#include <cmath>

#include "wldm/common.hpp"

namespace wldm::optim {

Adam::Adam(const nn::ParamStore& ps, const AdamConfig& cfg) : cfg_(cfg) {
  WLDM_CHECK(cfg.lr > 0.0f, "learning rate must be positive");
  WLDM_CHECK(cfg.beta1 >= 0.0f && cfg.beta1 < 1.0f, "beta1 must be in [0, 1)");
  WLDM_CHECK(cfg.beta2 >= 0.0f && cfg.beta2 < 1.0f, "beta2 must be in [0, 1)");
  WLDM_CHECK(cfg.eps > 0.0f, "eps must be positive");
  WLDM_CHECK(cfg.weight_decay >= 0.0f, "weight decay must be non-negative");
  m_.reserve(ps.items().size());
  v_.reserve(ps.items().size());
  for (const auto& [name, t] : ps.items()) {
    m_.emplace_back(static_cast<size_t>(t.numel()), 0.0f);
    v_.emplace_back(static_cast<size_t>(t.numel()), 0.0f);
  }
}

void Adam::step(const nn::ParamStore& ps, float lr_now) {
  WLDM_CHECK(ps.items().size() == m_.size(),
             "optimizer state was built for a different parameter store");
  ++step_count_;
  double b1 = cfg_.beta1, b2 = cfg_.beta2;
  double corr1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
  double corr2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
  for (size_t p = 0; p < m_.size(); ++p) {
    Tensor t = ps.items()[p].second;
    WLDM_CHECK(static_cast<size_t>(t.numel()) == m_[p].size(),
               "parameter '" + ps.items()[p].first + "' changed size under the optimizer");
    std::vector<float>& data = t.data();
    const std::vector<float>& grad = t.grad();  // zeros if backward never reached it
    std::vector<float>& m = m_[p];
    std::vector<float>& v = v_[p];
    for (size_t i = 0; i < m.size(); ++i) {
      float g = grad[i];
      m[i] = static_cast<float>(b1 * m[i] + (1.0 - b1) * g);
      v[i] = static_cast<float>(b2 * v[i] + (1.0 - b2) * static_cast<double>(g) * g);
      double m_hat = m[i] / corr1;
      double v_hat = v[i] / corr2;
      double update = lr_now * m_hat / (std::sqrt(v_hat) + cfg_.eps);
      if (cfg_.weight_decay > 0.0f) {
        update += static_cast<double>(lr_now) * cfg_.weight_decay * data[i];
      }
      data[i] = static_cast<float>(data[i] - update);
    }
  }
}

float lr_schedule(int64_t step, float base_lr, float gamma, int64_t interval) {
  WLDM_CHECK(step >= 0, "step must be non-negative");
  WLDM_CHECK(base_lr > 0.0f, "base learning rate must be positive");
  WLDM_CHECK(gamma > 0.0f, "decay factor must be positive");
  WLDM_CHECK(interval > 0, "decay interval must be positive");
  double k = static_cast<double>(step / interval);
  return static_cast<float>(static_cast<double>(base_lr) *
                            std::pow(static_cast<double>(gamma), k));
}

}  // namespace wldm::optim
