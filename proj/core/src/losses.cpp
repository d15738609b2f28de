#include "wldm/losses.hpp"

#include <string>

#include "wldm/common.hpp"
#include "wldm/dsp.hpp"
#include "wldm/ops.hpp"

namespace wldm::losses {

namespace {

/// Accepts (B, N) or (B, 1, N) and returns (B, N); rejects anything else.
Tensor as_batch_wave(const Tensor& x, const char* who) {
  if (x.ndim() == 2) return x;
  WLDM_CHECK(x.ndim() == 3 && x.dim(1) == 1,
             std::string(who) + " expects (B, N) or (B, 1, N), got " + shape_str(x.shape()));
  return ops::reshape(x, {x.dim(0), x.dim(2)});
}

void check_same_length(const Tensor& a, const Tensor& b, const char* who) {
  WLDM_CHECK(a.shape() == b.shape(), std::string(who) + " operands differ: " +
                                         shape_str(a.shape()) + " vs " +
                                         shape_str(b.shape()));
}

Tensor mean_abs_diff(const Tensor& a, const Tensor& b) {
  return ops::mean_all(ops::abs_val(ops::sub(a, b)));
}

}  // namespace

MelScale MelScale::make(int64_t n_mel, int n_fft, int win_length, int hop,
                        float sample_rate, float fmin, float fmax, float weight,
                        float floor_val) {
  MelScale s;
  s.n_mel = n_mel;
  s.n_fft = n_fft;
  s.win_length = win_length;
  s.hop = hop;
  s.weight = weight;
  s.floor_val = floor_val;
  s.fb = dsp::mel_filterbank(static_cast<int>(n_mel), n_fft, sample_rate, fmin, fmax);
  return s;
}

MultiScaleMelConfig MultiScaleMelConfig::make_default(float sample_rate) {
  MultiScaleMelConfig cfg;
  float fmax = sample_rate / 2.0f;
  cfg.scales.push_back(MelScale::make(40, 512, 512, 128, sample_rate, 0.0f, fmax));
  cfg.scales.push_back(MelScale::make(80, 1024, 1024, 256, sample_rate, 0.0f, fmax));
  cfg.scales.push_back(MelScale::make(160, 2048, 2048, 512, sample_rate, 0.0f, fmax));
  return cfg;
}

Tensor mel_loss(const Tensor& x, const Tensor& x_hat, const MultiScaleMelConfig& cfg) {
  WLDM_CHECK(!cfg.scales.empty(), "mel loss needs at least one scale");
  Tensor a = as_batch_wave(x, "mel_loss");
  Tensor b = as_batch_wave(x_hat, "mel_loss");
  check_same_length(a, b, "mel_loss");
  Tensor total;
  for (const auto& s : cfg.scales) {
    WLDM_CHECK(s.weight > 0.0f, "mel scale weights must be positive");
    Tensor la = dsp::log_mel(dsp::stft_magnitude(a, s.n_fft, s.win_length, s.hop),
                             s.fb, s.n_mel, s.floor_val);
    Tensor lb = dsp::log_mel(dsp::stft_magnitude(b, s.n_fft, s.win_length, s.hop),
                             s.fb, s.n_mel, s.floor_val);
    Tensor term = ops::mul_scalar(mean_abs_diff(la, lb), s.weight);
    total = total.defined() ? ops::add(total, term) : term;
  }
  return total;
}

std::vector<StftRes> default_spectral_resolutions() {
  return {{512, 512, 128}, {1024, 1024, 256}, {2048, 2048, 512}};
}

Tensor spectral_loss(const Tensor& x, const Tensor& x_hat,
                     const std::vector<StftRes>& resolutions) {
  WLDM_CHECK(!resolutions.empty(), "spectral loss needs at least one resolution");
  Tensor a = as_batch_wave(x, "spectral_loss");
  Tensor b = as_batch_wave(x_hat, "spectral_loss");
  check_same_length(a, b, "spectral_loss");
  Tensor total;
  for (const auto& r : resolutions) {
    Tensor ma = dsp::stft_magnitude(a, r.n_fft, r.win_length, r.hop);
    Tensor mb = dsp::stft_magnitude(b, r.n_fft, r.win_length, r.hop);
    Tensor term = mean_abs_diff(ma, mb);
    total = total.defined() ? ops::add(total, term) : term;
  }
  return total;
}

PeriodDiscriminator PeriodDiscriminator::make(nn::ParamStore& ps,
                                              const std::string& prefix, Pcg32& rng,
                                              int period) {
  WLDM_CHECK(period >= 1, "discriminator period must be positive");
  PeriodDiscriminator d;
  d.period = period;
  d.c1 = nn::Conv2d::make(ps, prefix + ".c1", rng, 1, 16, 5, 1, 3, 1, 2, 0);
  d.c2 = nn::Conv2d::make(ps, prefix + ".c2", rng, 16, 32, 5, 1, 3, 1, 2, 0);
  d.c3 = nn::Conv2d::make(ps, prefix + ".c3", rng, 32, 64, 5, 1, 3, 1, 2, 0);
  d.post = nn::Conv2d::make(ps, prefix + ".post", rng, 64, 1, 3, 1, 1, 1, 1, 0);
  nn::fill_param(d.post.w, 0.0f);
  nn::fill_param(d.post.b, 0.0f);
  return d;
}

DiscFeatures PeriodDiscriminator::forward(const Tensor& x) const {
  Tensor wave = as_batch_wave(x, "discriminator");
  int64_t batch = wave.dim(0);
  int64_t n = wave.dim(1);
  int64_t rem = n % period;
  Tensor padded = ops::reshape(wave, {batch, 1, n});
  if (rem != 0) {
    padded = ops::concat({padded, Tensor::zeros({batch, 1, period - rem})}, 2);
    n += period - rem;
  }
  Tensor h = ops::reshape(padded, {batch, 1, n / period, period});
  DiscFeatures out;
  h = ops::leaky_relu(c1.forward(h), 0.1f);
  out.feats.push_back(h);
  h = ops::leaky_relu(c2.forward(h), 0.1f);
  out.feats.push_back(h);
  h = ops::leaky_relu(c3.forward(h), 0.1f);
  out.feats.push_back(h);
  out.score = post.forward(h);
  out.feats.push_back(out.score);
  return out;
}

MultiPeriodDiscriminator MultiPeriodDiscriminator::make(const std::vector<int>& periods,
                                                        uint64_t seed) {
  WLDM_CHECK(!periods.empty(), "discriminator needs at least one period");
  MultiPeriodDiscriminator mpd;
  Pcg32 rng(seed);
  for (int p : periods) {
    mpd.discs.push_back(
        PeriodDiscriminator::make(mpd.params, "mpd.p" + std::to_string(p), rng, p));
  }
  return mpd;
}

std::vector<DiscFeatures> MultiPeriodDiscriminator::forward(const Tensor& x) const {
  std::vector<DiscFeatures> out;
  out.reserve(discs.size());
  for (const auto& d : discs) out.push_back(d.forward(x));
  return out;
}

Tensor lsgan_disc_loss(const Tensor& score_real, const Tensor& score_fake) {
  Tensor real_term = ops::mean_all(ops::square(ops::add_scalar(score_real, -1.0f)));
  Tensor fake_term = ops::mean_all(ops::square(score_fake));
  return ops::add(real_term, fake_term);
}

Tensor lsgan_gen_loss(const Tensor& score_fake) {
  return ops::mean_all(ops::square(ops::add_scalar(score_fake, -1.0f)));
}

AdvLosses adversarial_losses(const MultiPeriodDiscriminator& mpd, const Tensor& x,
                             const Tensor& x_hat) {
  Tensor x_hat_detached = ops::stop_gradient(x_hat);
  Tensor gen, disc;
  for (const auto& d : mpd.discs) {
    DiscFeatures real = d.forward(x);
    DiscFeatures fake_for_gen = d.forward(x_hat);
    DiscFeatures fake_for_disc = d.forward(x_hat_detached);
    Tensor g = lsgan_gen_loss(fake_for_gen.score);
    Tensor dl = lsgan_disc_loss(real.score, fake_for_disc.score);
    gen = gen.defined() ? ops::add(gen, g) : g;
    disc = disc.defined() ? ops::add(disc, dl) : dl;
  }
  float inv = 1.0f / static_cast<float>(mpd.discs.size());
  return {ops::mul_scalar(gen, inv), ops::mul_scalar(disc, inv)};
}

Tensor feature_matching_loss(const std::vector<Tensor>& feats_real,
                             const std::vector<Tensor>& feats_fake,
                             const std::vector<float>& lambda_l) {
  WLDM_CHECK(feats_real.size() == feats_fake.size(),
             "feature tap counts differ: " + std::to_string(feats_real.size()) +
                 " vs " + std::to_string(feats_fake.size()));
  WLDM_CHECK(!feats_real.empty(), "feature matching needs at least one tap");
  WLDM_CHECK(lambda_l.empty() || lambda_l.size() == feats_real.size(),
             "per-layer weight count must match tap count");
  Tensor total;
  for (size_t l = 0; l < feats_real.size(); ++l) {
    WLDM_CHECK(feats_real[l].shape() == feats_fake[l].shape(),
               "feature tap " + std::to_string(l) + " shapes differ: " +
                   shape_str(feats_real[l].shape()) + " vs " +
                   shape_str(feats_fake[l].shape()));
    Tensor term = mean_abs_diff(feats_real[l], feats_fake[l]);
    if (!lambda_l.empty()) term = ops::mul_scalar(term, lambda_l[l]);
    total = total.defined() ? ops::add(total, term) : term;
  }
  return total;
}

Tensor total_loss(const Tensor& adv, const Tensor& mel, const Tensor& spectral,
                  const Tensor& fm, const LossWeights& w) {
  Tensor out = ops::add(adv, ops::mul_scalar(mel, w.lambda_mel));
  out = ops::add(out, ops::mul_scalar(spectral, w.lambda_spectral));
  return ops::add(out, ops::mul_scalar(fm, w.lambda_fm));
}

}  // namespace wldm::losses
