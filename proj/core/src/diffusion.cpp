#include "wldm/diffusion.hpp"

#include <cmath>
#include <cstdint>

#include "wldm/common.hpp"
#include "wldm/ops.hpp"

namespace wldm::diffusion {

namespace {

float at_1based(const std::vector<float>& v, int t, const char* what) {
  WLDM_CHECK(t >= 1 && t <= static_cast<int>(v.size()),
             std::string(what) + " timestep " + std::to_string(t) +
                 " outside [1, " + std::to_string(v.size()) + "]");
  return v[static_cast<size_t>(t - 1)];
}

/// data[i] = a * x[i] + b * e[i], no autodiff graph.
Tensor affine_combine(const Tensor& x, const Tensor& e, double a, double b) {
  WLDM_CHECK(x.shape() == e.shape(), "noise shape " + shape_str(e.shape()) +
                                         " != state shape " + shape_str(x.shape()));
  std::vector<float> out(static_cast<size_t>(x.numel()));
  const auto& xd = x.data();
  const auto& ed = e.data();
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(a * static_cast<double>(xd[i]) +
                                b * static_cast<double>(ed[i]));
  }
  return Tensor::from_data(x.shape(), out);
}

Tensor normal_like(const Shape& shape, Pcg32& rng) {
  int64_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<float> v(static_cast<size_t>(n));
  for (auto& e : v) e = rng.normal();
  return Tensor::from_data(shape, v);
}

}  // namespace

ScheduleKind schedule_kind_from_string(const std::string& s) {
  WLDM_CHECK(s == "linear", "unknown variance schedule kind '" + s + "' (supported: linear)");
  return ScheduleKind::kLinear;
}

float VarianceSchedule::beta_at(int t) const { return at_1based(beta, t, "beta"); }
float VarianceSchedule::alpha_at(int t) const { return at_1based(alpha, t, "alpha"); }
float VarianceSchedule::alpha_bar_at(int t) const { return at_1based(alpha_bar, t, "alpha_bar"); }
float VarianceSchedule::sigma_at(int t) const { return at_1based(sigma, t, "sigma"); }

VarianceSchedule make_schedule(ScheduleKind kind, int T, double beta_1, double beta_T) {
  WLDM_CHECK(kind == ScheduleKind::kLinear, "unsupported schedule kind");
  WLDM_CHECK(T >= 1, "schedule needs at least one step, got T=" + std::to_string(T));
  WLDM_CHECK(0.0 < beta_1 && beta_1 < beta_T && beta_T < 1.0,
             "schedule bounds must satisfy 0 < beta_1 < beta_T < 1");
  VarianceSchedule s;
  s.T = T;
  s.beta.resize(static_cast<size_t>(T));
  s.alpha.resize(static_cast<size_t>(T));
  s.alpha_bar.resize(static_cast<size_t>(T));
  s.sigma.resize(static_cast<size_t>(T));
  double running = 1.0;
  for (int t = 0; t < T; ++t) {
    double frac = T == 1 ? 0.0 : static_cast<double>(t) / static_cast<double>(T - 1);
    float b = static_cast<float>(beta_1 + (beta_T - beta_1) * frac);
    float a = 1.0f - b;
    s.beta[static_cast<size_t>(t)] = b;
    s.alpha[static_cast<size_t>(t)] = a;
    // Carry the product through the float-rounded previous term so the
    // pairwise identity alpha_bar[t] = alpha_bar[t-1] * alpha[t] holds to
    // one float rounding, while each multiply itself runs in double.
    running = t == 0 ? static_cast<double>(a)
                     : static_cast<double>(s.alpha_bar[static_cast<size_t>(t - 1)]) *
                           static_cast<double>(a);
    s.alpha_bar[static_cast<size_t>(t)] = static_cast<float>(running);
    s.sigma[static_cast<size_t>(t)] = std::sqrt(b);
  }
  return s;
}

Tensor forward_step(const Tensor& z_prev, int t, const Tensor& eps,
                    const VarianceSchedule& s) {
  double a = static_cast<double>(s.alpha_at(t));
  return affine_combine(z_prev, eps, std::sqrt(a), std::sqrt(1.0 - a));
}

Tensor forward_marginal(const Tensor& z0, int t, const Tensor& eps,
                        const VarianceSchedule& s) {
  double ab = static_cast<double>(s.alpha_bar_at(t));
  return affine_combine(z0, eps, std::sqrt(ab), std::sqrt(1.0 - ab));
}

EstimatorFn as_estimator(const estimator::UNet& unet) {
  return [&unet](const Tensor& z_t, const Tensor& cond,
                 const std::vector<int64_t>& ts) {
    return unet.forward(z_t, cond, ts);
  };
}

Tensor training_step(const DiffusionPair& pair, const EstimatorFn& est,
                     const VarianceSchedule& s, Pcg32& rng) {
  WLDM_CHECK(pair.z0.shape() == pair.z0_degraded.shape(),
             "clean/degraded latent shapes differ: " + shape_str(pair.z0.shape()) +
                 " vs " + shape_str(pair.z0_degraded.shape()));
  WLDM_CHECK(pair.z0.ndim() == 3, "latent must be (B, C, L), got " +
                                      shape_str(pair.z0.shape()));
  int64_t batch = pair.z0.dim(0);
  int64_t per = pair.z0.numel() / batch;

  // Fixed draw order: one timestep per batch element, then the noise tensor
  // in row-major order.
  std::vector<int64_t> ts(static_cast<size_t>(batch));
  for (auto& t : ts) t = 1 + static_cast<int64_t>(rng.uniform_u32(static_cast<uint32_t>(s.T)));
  Tensor eps = normal_like(pair.z0.shape(), rng);

  // z_t with a per-element alpha_bar; no gradient is needed through the
  // noising itself.
  std::vector<float> zt(static_cast<size_t>(pair.z0.numel()));
  const auto& z0d = pair.z0.data();
  const auto& ed = eps.data();
  for (int64_t b = 0; b < batch; ++b) {
    double ab = static_cast<double>(s.alpha_bar_at(static_cast<int>(ts[static_cast<size_t>(b)])));
    double ca = std::sqrt(ab);
    double ce = std::sqrt(1.0 - ab);
    for (int64_t i = b * per; i < (b + 1) * per; ++i) {
      size_t k = static_cast<size_t>(i);
      zt[k] = static_cast<float>(ca * static_cast<double>(z0d[k]) +
                                 ce * static_cast<double>(ed[k]));
    }
  }
  Tensor z_t = Tensor::from_data(pair.z0.shape(), zt);

  Tensor eps_hat = est(z_t, pair.z0_degraded, ts);
  WLDM_CHECK(eps_hat.shape() == pair.z0.shape(),
             "estimator returned " + shape_str(eps_hat.shape()) + ", expected " +
                 shape_str(pair.z0.shape()));
  return ops::mean_all(ops::square(ops::sub(eps_hat, eps)));
}

Tensor sample(const Tensor& z0_degraded, const EstimatorFn& est,
              const VarianceSchedule& s, Pcg32& rng) {
  NoGradGuard no_grad;
  WLDM_CHECK(z0_degraded.ndim() == 3, "conditioning must be (B, C, L), got " +
                                          shape_str(z0_degraded.shape()));
  int64_t batch = z0_degraded.dim(0);
  Tensor z = normal_like(z0_degraded.shape(), rng);
  for (int t = s.T; t >= 1; --t) {
    std::vector<int64_t> ts(static_cast<size_t>(batch), t);
    Tensor eps_hat = est(z, z0_degraded, ts);
    double a = static_cast<double>(s.alpha_at(t));
    double ab = static_cast<double>(s.alpha_bar_at(t));
    double coef = (1.0 - a) / std::sqrt(1.0 - ab);
    double inv_sqrt_a = 1.0 / std::sqrt(a);
    Tensor mean = affine_combine(z, eps_hat, inv_sqrt_a, -coef * inv_sqrt_a);
    if (t > 1) {
      Tensor zeta = normal_like(z.shape(), rng);
      z = affine_combine(mean, zeta, 1.0, static_cast<double>(s.sigma_at(t)));
    } else {
      z = mean;
    }
  }
  return z;
}

Tensor restore(const Tensor& wave_degraded, const codec::Codec& codec,
               const estimator::UNet& unet, const VarianceSchedule& s,
               Pcg32& rng) {
  NoGradGuard no_grad;
  const auto& cfg = codec.cfg;
  int64_t unit = static_cast<int64_t>(cfg.hop) * cfg.down_factor *
                 (int64_t{1} << unet.cfg.stages);
  int64_t n = wave_degraded.dim(-1);
  WLDM_CHECK(n % unit == 0,
             "waveform length " + std::to_string(n) +
                 " does not reach the denoiser grid; pad to a multiple of " +
                 std::to_string(unit) + " samples (hop " + std::to_string(cfg.hop) +
                 " x downsample " + std::to_string(cfg.down_factor) + " x 2^" +
                 std::to_string(unet.cfg.stages) + ")");
  WLDM_CHECK(cfg.c_down % (1 << unet.cfg.stages) == 0,
             "latent channel count " + std::to_string(cfg.c_down) +
                 " must be divisible by 2^" + std::to_string(unet.cfg.stages));
  WLDM_CHECK(unet.cfg.cond_channels == cfg.c_down,
             "denoiser conditioning width " + std::to_string(unet.cfg.cond_channels) +
                 " != latent channel count " + std::to_string(cfg.c_down));

  Tensor mel = codec.mel(wave_degraded);
  Tensor z_deg = codec.downsample(codec.encode(mel, {}));
  Tensor z_hat0 = sample(z_deg, as_estimator(unet), s, rng);
  codec::Gfsq::Result q = codec.quantize_latent(z_hat0);
  return codec.decode(codec.upsample(q.values));
}

}  // namespace wldm::diffusion
