#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "wldm/rng.hpp"
#include "wldm/tensor.hpp"

namespace wldm::testing {

/// Fills a tensor with draws from U(lo, hi).
inline void fill_uniform(Tensor& t, Pcg32& rng, float lo = -1.0f, float hi = 1.0f) {
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
}

inline void fill_normal(Tensor& t, Pcg32& rng, float scale = 1.0f) {
  for (auto& v : t.data()) v = rng.normal() * scale;
}

inline Tensor rand_tensor(const Shape& shape, Pcg32& rng, float lo = -1.0f, float hi = 1.0f,
                          bool requires_grad = true) {
  Tensor t = Tensor::zeros(shape, requires_grad);
  fill_uniform(t, rng, lo, hi);
  return t;
}

/// Reduces an arbitrary op output to a scalar with fixed pseudo-random unit
/// weights so every output element influences the loss independently. The
/// reduction runs in double on top of the float32 data to keep the oracle's
/// own noise below the gradients being measured.
inline double weighted_loss_value(const Tensor& y, uint64_t seed) {
  Pcg32 rng(seed);
  double acc = 0.0;
  for (float v : y.data()) {
    float w = rng.uniform(-1.0f, 1.0f);
    acc += static_cast<double>(v) * static_cast<double>(w);
  }
  return acc;
}

/// Same weights as weighted_loss_value, as the seed gradient for backward.
inline std::vector<float> weighted_loss_seed(int64_t n, uint64_t seed) {
  Pcg32 rng(seed);
  std::vector<float> w(static_cast<size_t>(n));
  for (auto& v : w) v = rng.uniform(-1.0f, 1.0f);
  return w;
}

struct FdReport {
  double max_rel_err = 0.0;
  int checked = 0;
};

/// Central finite-difference check of d(loss)/d(inputs) where
/// loss = sum_i w_i * forward(inputs)_i with fixed weights. Checks
/// `samples_per_input` randomly chosen elements of each input (all elements
/// when the input is small). Relative error uses a floored denominator so
/// near-zero gradients compare absolutely.
inline FdReport fd_check(const std::vector<Tensor>& inputs,
                         const std::function<Tensor()>& forward,
                         int samples_per_input = 24, double h = 1e-2,
                         uint64_t seed = 0xfd5eed) {
  FdReport rep;
  for (const auto& input : inputs) {
    Tensor in = input;
    in.zero_grad();
  }
  Tensor y0 = forward();
  uint64_t wseed = seed ^ 0x9e3779b97f4a7c15ULL;
  y0.backward(weighted_loss_seed(y0.numel(), wseed));

  Pcg32 pick(seed);
  for (const auto& input : inputs) {
    Tensor in = input;
    if (!in.requires_grad()) continue;
    int64_t n = in.numel();
    std::vector<int64_t> idx;
    if (n <= samples_per_input) {
      for (int64_t i = 0; i < n; ++i) idx.push_back(i);
    } else {
      for (int s = 0; s < samples_per_input; ++s) {
        idx.push_back(static_cast<int64_t>(pick.uniform_u32(static_cast<uint32_t>(n))));
      }
    }
    for (int64_t i : idx) {
      float saved = in.data()[static_cast<size_t>(i)];
      double hh = h * std::max(1.0, std::fabs(static_cast<double>(saved)));
      in.data()[static_cast<size_t>(i)] = static_cast<float>(saved + hh);
      double lp = weighted_loss_value(forward(), wseed);
      in.data()[static_cast<size_t>(i)] = static_cast<float>(saved - hh);
      double lm = weighted_loss_value(forward(), wseed);
      in.data()[static_cast<size_t>(i)] = saved;
      double fd = (lp - lm) /
                  (static_cast<double>(static_cast<float>(saved + hh)) -
                   static_cast<double>(static_cast<float>(saved - hh)));
      double an = static_cast<double>(in.grad()[static_cast<size_t>(i)]);
      // Denominator floored at 1: gradients below O(1) are held to the same
      // absolute error, which keeps float32 forward noise from masquerading
      // as a backward bug on near-cancelling weighted sums.
      double rel = std::fabs(an - fd) / std::max({1.0, std::fabs(an), std::fabs(fd)});
      if (rel > rep.max_rel_err) rep.max_rel_err = rel;
      ++rep.checked;
    }
  }
  return rep;
}

/// Directional central finite difference for composite blocks: perturbs every
/// input simultaneously along a fixed random direction and compares against
/// the analytic directional derivative. One direction costs two forward
/// passes regardless of parameter count.
inline FdReport fd_check_directional(const std::vector<Tensor>& inputs,
                                     const std::function<Tensor()>& forward,
                                     int directions = 8, double h = 1e-2,
                                     uint64_t seed = 0xd15eed) {
  FdReport rep;
  for (const auto& input : inputs) {
    Tensor in = input;
    in.zero_grad();
  }
  Tensor y0 = forward();
  uint64_t wseed = seed ^ 0x9e3779b97f4a7c15ULL;
  y0.backward(weighted_loss_seed(y0.numel(), wseed));

  for (int d = 0; d < directions; ++d) {
    Pcg32 dir(seed + 1000ULL * static_cast<uint64_t>(d) + 7ULL);
    // Build the direction and the analytic dot product in one pass.
    std::vector<std::vector<float>> vs;
    double analytic = 0.0;
    for (const auto& input : inputs) {
      Tensor in = input;
      std::vector<float> v(static_cast<size_t>(in.numel()));
      for (auto& e : v) e = dir.uniform(-1.0f, 1.0f);
      if (in.requires_grad()) {
        const auto& g = in.grad();
        for (size_t i = 0; i < v.size(); ++i) {
          analytic += static_cast<double>(g[i]) * static_cast<double>(v[i]);
        }
      }
      vs.push_back(std::move(v));
    }
    auto shift = [&](double scale) {
      for (size_t k = 0; k < inputs.size(); ++k) {
        Tensor in = inputs[k];
        auto& data = in.data();
        const auto& v = vs[k];
        for (size_t i = 0; i < data.size(); ++i) {
          data[i] += static_cast<float>(scale * static_cast<double>(v[i]));
        }
      }
    };
    std::vector<std::vector<float>> saved;
    for (const auto& input : inputs) saved.push_back(input.data());
    shift(h);
    double lp = weighted_loss_value(forward(), wseed);
    for (size_t k = 0; k < inputs.size(); ++k) {
      Tensor in = inputs[k];
      in.data() = saved[k];
    }
    shift(-h);
    double lm = weighted_loss_value(forward(), wseed);
    for (size_t k = 0; k < inputs.size(); ++k) {
      Tensor in = inputs[k];
      in.data() = saved[k];
    }
    double fd = (lp - lm) / (2.0 * h);
    double rel = std::fabs(analytic - fd) / std::max({1.0, std::fabs(analytic), std::fabs(fd)});
    if (rel > rep.max_rel_err) rep.max_rel_err = rel;
    ++rep.checked;
  }
  return rep;
}

}  // namespace wldm::testing
