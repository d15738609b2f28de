#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"
#include "wldm/codec.hpp"
#include "wldm/diffusion.hpp"
#include "wldm/estimator.hpp"
#include "wldm/ops.hpp"
#include "wldm/rng.hpp"
#include "wldm/tensor.hpp"

using namespace wldm;
using namespace wldm::testing;
namespace D = wldm::diffusion;

namespace {

D::VarianceSchedule desk_schedule(int T = 50) {
  return D::make_schedule(D::ScheduleKind::kLinear, T, 1e-4, 0.02);
}

}  // namespace

TEST_CASE("variance schedule: construction, identities, and bounds") {
  auto s = D::make_schedule(D::ScheduleKind::kLinear, 1000, 1e-4, 0.02);
  REQUIRE(s.T == 1000);
  REQUIRE(s.beta.size() == 1000);

  // Endpoints and the single-term product.
  CHECK(s.beta.front() == doctest::Approx(1e-4));
  CHECK(s.beta.back() == doctest::Approx(0.02));
  CHECK(s.alpha_bar_at(1) == doctest::Approx(1.0 - 1e-4));

  // Strict monotonicity in both sequences.
  for (int t = 2; t <= s.T; ++t) {
    CHECK(s.beta_at(t) > s.beta_at(t - 1));
    CHECK(s.alpha_bar_at(t) < s.alpha_bar_at(t - 1));
  }

  // Pairwise product identity to float rounding.
  for (int t = 2; t <= s.T; ++t) {
    double lhs = static_cast<double>(s.alpha_bar_at(t));
    double rhs = static_cast<double>(s.alpha_bar_at(t - 1)) *
                 static_cast<double>(s.alpha_at(t));
    CHECK(std::fabs(lhs - rhs) < 1e-7);
  }

  // Independent running product in double as the oracle for the tail value.
  double prod = 1.0;
  for (int t = 0; t < 1000; ++t) {
    double b = 1e-4 + (0.02 - 1e-4) * (static_cast<double>(t) / 999.0);
    prod *= 1.0 - b;
  }
  CHECK(std::fabs(static_cast<double>(s.alpha_bar_at(1000)) - prod) < 1e-6);

  for (int t = 1; t <= s.T; ++t) {
    CHECK(s.alpha_at(t) == doctest::Approx(1.0f - s.beta_at(t)));
    CHECK(s.sigma_at(t) == doctest::Approx(std::sqrt(s.beta_at(t))));
    CHECK(s.beta_at(t) > 0.0f);
    CHECK(s.beta_at(t) < 1.0f);
  }

  // A one-step schedule degenerates to the lower endpoint.
  auto s1 = D::make_schedule(D::ScheduleKind::kLinear, 1, 1e-4, 0.02);
  CHECK(s1.beta_at(1) == doctest::Approx(1e-4));

  CHECK_THROWS(D::make_schedule(D::ScheduleKind::kLinear, 0, 1e-4, 0.02));
  CHECK_THROWS(D::make_schedule(D::ScheduleKind::kLinear, 10, 0.0, 0.02));
  CHECK_THROWS(D::make_schedule(D::ScheduleKind::kLinear, 10, 0.02, 0.02));
  CHECK_THROWS(D::make_schedule(D::ScheduleKind::kLinear, 10, 1e-4, 1.0));
  CHECK_THROWS(D::schedule_kind_from_string("cosine"));
  CHECK(D::schedule_kind_from_string("linear") == D::ScheduleKind::kLinear);
}

TEST_CASE("forward step: scaling, bounds, and variance preservation") {
  auto s = desk_schedule();
  Pcg32 rng(101);
  Tensor z = rand_tensor({1, 2, 4}, rng);
  Tensor zero_eps = Tensor::zeros(z.shape());

  // eps = 0 leaves a pure sqrt(alpha_t) scaling.
  Tensor stepped = D::forward_step(z, 7, zero_eps, s);
  float sa = std::sqrt(s.alpha_at(7));
  for (int64_t i = 0; i < z.numel(); ++i) {
    CHECK(stepped.data()[static_cast<size_t>(i)] ==
          doctest::Approx(sa * z.data()[static_cast<size_t>(i)]));
  }

  CHECK_THROWS(D::forward_step(z, 0, zero_eps, s));
  CHECK_THROWS(D::forward_step(z, 51, zero_eps, s));
  CHECK_THROWS(D::forward_step(z, 7, Tensor::zeros({1, 2, 5}), s));

  // Unit-variance input plus fresh noise keeps unit variance:
  // alpha_t + (1 - alpha_t) = 1. Monte-Carlo over 1e5 draws, 3 SE bound.
  const int kTrials = 100000;
  const int t = 25;
  double sum = 0.0, sumsq = 0.0;
  int64_t count = 0;
  for (int trial = 0; trial < kTrials; ++trial) {
    std::vector<float> zv(4), ev(4);
    for (auto& v : zv) v = rng.normal();
    for (auto& v : ev) v = rng.normal();
    Tensor zt = D::forward_step(Tensor::from_data({1, 1, 4}, zv), t,
                                Tensor::from_data({1, 1, 4}, ev), s);
    for (int64_t i = 0; i < 4; ++i) {
      double v = zt.data()[static_cast<size_t>(i)];
      sum += v;
      sumsq += v * v;
      ++count;
    }
  }
  double mean = sum / static_cast<double>(count);
  double var = sumsq / static_cast<double>(count) - mean * mean;
  double se_var = std::sqrt(2.0 / static_cast<double>(count - 1));
  CHECK(std::fabs(var - 1.0) < 3.0 * se_var);
}

TEST_CASE("forward marginal: closed form and degenerate inputs") {
  auto s = desk_schedule();
  Pcg32 rng(103);
  Tensor eps = rand_tensor({1, 2, 4}, rng);

  // z0 = 0 leaves the pure noise branch.
  Tensor zt = D::forward_marginal(Tensor::zeros({1, 2, 4}), 30, eps, s);
  float ce = std::sqrt(1.0f - s.alpha_bar_at(30));
  for (int64_t i = 0; i < eps.numel(); ++i) {
    CHECK(zt.data()[static_cast<size_t>(i)] ==
          doctest::Approx(ce * eps.data()[static_cast<size_t>(i)]));
  }

  // At t = 1 the signal survives almost untouched: alpha_bar_1 = 1 - 1e-4.
  Tensor z0 = rand_tensor({1, 2, 4}, rng);
  Tensor z1 = D::forward_marginal(z0, 1, Tensor::zeros(z0.shape()), s);
  for (int64_t i = 0; i < z0.numel(); ++i) {
    CHECK(z1.data()[static_cast<size_t>(i)] ==
          doctest::Approx(z0.data()[static_cast<size_t>(i)]).epsilon(1e-3));
  }
}

TEST_CASE("iterated chain matches the closed-form marginal in distribution") {
  auto s = desk_schedule(50);
  Pcg32 rng(109);
  Tensor z0 = rand_tensor({1, 2, 8}, rng);
  const int64_t n_el = z0.numel();
  const int kTrials = 10000;

  for (int t : {1, 25, 50}) {
    std::vector<double> sum_i(static_cast<size_t>(n_el), 0.0),
        sq_i(static_cast<size_t>(n_el), 0.0), sum_m(static_cast<size_t>(n_el), 0.0),
        sq_m(static_cast<size_t>(n_el), 0.0);
    for (int trial = 0; trial < kTrials; ++trial) {
      Tensor z = z0;
      for (int tau = 1; tau <= t; ++tau) {
        std::vector<float> ev(static_cast<size_t>(n_el));
        for (auto& v : ev) v = rng.normal();
        z = D::forward_step(z, tau, Tensor::from_data(z0.shape(), ev), s);
      }
      std::vector<float> ev(static_cast<size_t>(n_el));
      for (auto& v : ev) v = rng.normal();
      Tensor zm = D::forward_marginal(z0, t, Tensor::from_data(z0.shape(), ev), s);
      for (int64_t i = 0; i < n_el; ++i) {
        size_t k = static_cast<size_t>(i);
        double vi = z.data()[k], vm = zm.data()[k];
        sum_i[k] += vi;
        sq_i[k] += vi * vi;
        sum_m[k] += vm;
        sq_m[k] += vm * vm;
      }
    }
    const double n = kTrials;
    for (int64_t i = 0; i < n_el; ++i) {
      size_t k = static_cast<size_t>(i);
      double mi = sum_i[k] / n, mm = sum_m[k] / n;
      double vi = sq_i[k] / n - mi * mi, vm = sq_m[k] / n - mm * mm;
      double se_mean = std::sqrt(vi / n + vm / n);
      double se_var = std::sqrt(2.0 * (vi * vi + vm * vm) / (n - 1.0));
      INFO("t " << t << " element " << i);
      CHECK(std::fabs(mi - mm) < 3.0 * se_mean);
      CHECK(std::fabs(vi - vm) < 3.0 * se_var);
    }
  }
}

TEST_CASE("training objective: perfect and null estimators, gradient flow") {
  auto s = desk_schedule();

  // Null estimator: per-element chi-square with mean 1.
  D::EstimatorFn zero_est = [](const Tensor& z_t, const Tensor&,
                               const std::vector<int64_t>&) {
    return Tensor::zeros(z_t.shape());
  };
  Pcg32 rng(211);
  Tensor z0 = rand_tensor({1, 2, 8}, rng);
  D::DiffusionPair pair{z0, z0};
  double acc = 0.0;
  const int kTrials = 10000;
  for (int i = 0; i < kTrials; ++i) {
    acc += D::training_step(pair, zero_est, s, rng).item();
  }
  CHECK(std::fabs(acc / kTrials - 1.0) < 0.05);

  // With z0 = 0 the drawn noise is identifiable from z_t alone, so an exact
  // estimator exists in closed form; the loss must vanish.
  D::EstimatorFn exact_est = [&s](const Tensor& z_t, const Tensor&,
                                  const std::vector<int64_t>& ts) {
    int64_t batch = z_t.dim(0);
    int64_t per = z_t.numel() / batch;
    std::vector<float> out(static_cast<size_t>(z_t.numel()));
    for (int64_t b = 0; b < batch; ++b) {
      double ce = std::sqrt(
          1.0 - static_cast<double>(s.alpha_bar_at(static_cast<int>(ts[static_cast<size_t>(b)]))));
      for (int64_t i = b * per; i < (b + 1) * per; ++i) {
        out[static_cast<size_t>(i)] =
            static_cast<float>(static_cast<double>(z_t.data()[static_cast<size_t>(i)]) / ce);
      }
    }
    return Tensor::from_data(z_t.shape(), out);
  };
  D::DiffusionPair null_pair{Tensor::zeros({2, 2, 8}), Tensor::zeros({2, 2, 8})};
  for (int i = 0; i < 16; ++i) {
    CHECK(D::training_step(null_pair, exact_est, s, rng).item() < 1e-10);
  }

  // Shape-mismatched pairs are rejected.
  D::DiffusionPair bad{Tensor::zeros({1, 2, 8}), Tensor::zeros({1, 2, 9})};
  CHECK_THROWS(D::training_step(bad, zero_est, s, rng));

  // Same rng state reproduces the loss bit for bit.
  estimator::UNetConfig ucfg;
  ucfg.c_base = 8;
  ucfg.stages = 1;
  ucfg.heads = 4;
  ucfg.time_width = 8;
  ucfg.cond_channels = 2;
  auto unet = estimator::UNet::make(ucfg, 71);
  Pcg32 fill_rng(73);
  fill_uniform(unet.out_proj.w, fill_rng, -0.2f, 0.2f);

  Pcg32 ra(401), rb(401);
  Tensor la = D::training_step(pair, D::as_estimator(unet), s, ra);
  Tensor lb = D::training_step(pair, D::as_estimator(unet), s, rb);
  CHECK(la.item() == lb.item());

  // Gradients reach the network, including layers before the output head.
  unet.params.zero_grad();
  Tensor loss = D::training_step(pair, D::as_estimator(unet), s, ra);
  loss.backward();
  double gsum = 0.0;
  for (float g : unet.in_proj.w.grad()) gsum += std::fabs(g);
  CHECK(gsum > 0.0);
}

TEST_CASE("sampler: determinism, single-step algebra, and posterior oracle") {
  D::EstimatorFn zero_est = [](const Tensor& z_t, const Tensor&,
                               const std::vector<int64_t>&) {
    return Tensor::zeros(z_t.shape());
  };

  // Bit-identical outputs for identical rng states.
  auto s = desk_schedule();
  Tensor cond = Tensor::zeros({1, 2, 8});
  Pcg32 ra(503), rb(503);
  Tensor za = D::sample(cond, zero_est, s, ra);
  Tensor zb = D::sample(cond, zero_est, s, rb);
  REQUIRE(za.shape() == cond.shape());
  for (int64_t i = 0; i < za.numel(); ++i) {
    CHECK(za.data()[static_cast<size_t>(i)] == zb.data()[static_cast<size_t>(i)]);
  }

  // T = 1 with a null estimator reduces to dividing the initial noise by
  // sqrt(alpha_1), with no fresh noise at the final step.
  auto s1 = D::make_schedule(D::ScheduleKind::kLinear, 1, 1e-4, 0.02);
  Pcg32 rc(509), rc_clone(509);
  Tensor out1 = D::sample(cond, zero_est, s1, rc);
  std::vector<float> expect(static_cast<size_t>(cond.numel()));
  for (auto& v : expect) v = rc_clone.normal();
  float inv = static_cast<float>(1.0 / std::sqrt(static_cast<double>(s1.alpha_at(1))));
  for (int64_t i = 0; i < out1.numel(); ++i) {
    CHECK(out1.data()[static_cast<size_t>(i)] ==
          doctest::Approx(expect[static_cast<size_t>(i)] * inv));
  }

  // Point-mass target: with the exact posterior estimator
  // eps = (z_t - sqrt(ab_t) mu) / sqrt(1 - ab_t), the final reverse step
  // collapses every chain onto mu exactly, so each sample must return mu.
  const float mu = 0.7f;
  D::EstimatorFn posterior_est = [&s, mu](const Tensor& z_t, const Tensor&,
                                          const std::vector<int64_t>& ts) {
    int64_t batch = z_t.dim(0);
    int64_t per = z_t.numel() / batch;
    std::vector<float> out(static_cast<size_t>(z_t.numel()));
    for (int64_t b = 0; b < batch; ++b) {
      double ab = s.alpha_bar_at(static_cast<int>(ts[static_cast<size_t>(b)]));
      double ca = std::sqrt(ab), ce = std::sqrt(1.0 - ab);
      for (int64_t i = b * per; i < (b + 1) * per; ++i) {
        out[static_cast<size_t>(i)] = static_cast<float>(
            (static_cast<double>(z_t.data()[static_cast<size_t>(i)]) - ca * mu) / ce);
      }
    }
    return Tensor::from_data(z_t.shape(), out);
  };
  Pcg32 rd(521);
  for (int rep = 0; rep < 10; ++rep) {
    Tensor z = D::sample(Tensor::zeros({1, 1, 4}), posterior_est, s, rd);
    for (int64_t i = 0; i < z.numel(); ++i) {
      CHECK(z.data()[static_cast<size_t>(i)] == doctest::Approx(mu).epsilon(1e-4));
    }
  }
}

TEST_CASE("restoration pipeline: shape audit, output range, padding guidance") {
  codec::CodecConfig ccfg;
  ccfg.n_fft = 32;
  ccfg.win_length = 32;
  ccfg.hop = 16;
  ccfg.sample_rate = 1600;
  ccfg.fmax = 800.0f;
  ccfg.n_mel = 6;
  ccfg.enc_widths = {12};
  ccfg.enc_blocks = {1};
  ccfg.d = 12;
  ccfg.c_down = 8;
  ccfg.dec_init_channels = 10;
  ccfg.dec_channels = {8, 6, 4};
  ccfg.dec_factors = {4, 2, 2};
  auto codec = codec::Codec::make(ccfg, 601);

  estimator::UNetConfig ucfg;
  ucfg.c_base = 8;
  ucfg.stages = 2;
  ucfg.heads = 4;
  ucfg.time_width = 8;
  ucfg.cond_channels = 8;
  auto unet = estimator::UNet::make(ucfg, 607);

  auto s = desk_schedule(5);
  Pcg32 rng(613);
  Tensor wave = rand_tensor({1, 1, 256}, rng, -0.5f, 0.5f);
  Tensor restored = D::restore(wave, codec, unet, s, rng);
  REQUIRE(restored.shape() == Shape{1, 1, 256});
  for (int64_t i = 0; i < restored.numel(); ++i) {
    CHECK(std::fabs(restored.data()[static_cast<size_t>(i)]) <= 1.0f);
  }

  // Length off the denoiser grid: the error must say how much to pad to.
  bool threw = false;
  try {
    D::restore(rand_tensor({1, 1, 192}, rng, -0.5f, 0.5f), codec, unet, s, rng);
  } catch (const std::exception& e) {
    threw = true;
    CHECK(std::string(e.what()).find("pad to a multiple of 128") != std::string::npos);
  }
  CHECK(threw);

  // Conditioning width mismatches are rejected up front.
  estimator::UNetConfig wide = ucfg;
  wide.cond_channels = 16;
  auto unet_wide = estimator::UNet::make(wide, 617);
  CHECK_THROWS(D::restore(wave, codec, unet_wide, s, rng));
}
