#include "wldm/nn.hpp"

#include <cmath>

namespace wldm::nn {

Tensor ParamStore::add(const std::string& name, Tensor t) {
  WLDM_CHECK(!index_.count(name), "duplicate parameter name: " + name);
  t.set_requires_grad(true);
  index_[name] = items_.size();
  items_.emplace_back(name, t);
  return t;
}

Tensor ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  WLDM_CHECK(it != index_.end(), "no parameter named: " + name);
  return items_[it->second].second;
}

int64_t ParamStore::scalar_count() const {
  int64_t n = 0;
  for (const auto& [name, t] : items_) n += t.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [name, t] : items_) {
    Tensor p = t;
    p.zero_grad();
  }
}

Tensor uniform_fan_in(Pcg32& rng, const Shape& shape, int64_t fan_in) {
  WLDM_CHECK(fan_in > 0, "fan_in must be positive");
  float bound = 1.0f / std::sqrt(static_cast<float>(fan_in));
  Tensor t = Tensor::zeros(shape);
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

void fill_param(Tensor& t, float v) {
  std::fill(t.data().begin(), t.data().end(), v);
}

Conv1d Conv1d::make(ParamStore& ps, const std::string& prefix, Pcg32& rng,
                    int64_t cin, int64_t cout, int k, int stride, int pad, int dil,
                    int groups, bool bias) {
  Conv1d c;
  c.stride = stride;
  c.pad = pad;
  c.dil = dil;
  c.groups = groups;
  int64_t fan_in = (cin / groups) * k;
  c.w = ps.add(prefix + ".w", uniform_fan_in(rng, {cout, cin / groups, k}, fan_in));
  if (bias) c.b = ps.add(prefix + ".b", uniform_fan_in(rng, {cout}, fan_in));
  return c;
}

Tensor Conv1d::forward(const Tensor& x) const {
  return ops::conv1d(x, w, b, stride, pad, dil, groups);
}

ConvT1d ConvT1d::make(ParamStore& ps, const std::string& prefix, Pcg32& rng,
                      int64_t cin, int64_t cout, int k, int stride, int pad,
                      int groups, bool bias) {
  ConvT1d c;
  c.stride = stride;
  c.pad = pad;
  c.groups = groups;
  int64_t fan_in = (cin / groups) * k;
  c.w = ps.add(prefix + ".w", uniform_fan_in(rng, {cin, cout / groups, k}, fan_in));
  if (bias) c.b = ps.add(prefix + ".b", uniform_fan_in(rng, {cout}, fan_in));
  return c;
}

Tensor ConvT1d::forward(const Tensor& x) const {
  return ops::conv_transpose1d(x, w, b, stride, pad, groups);
}

Conv2d Conv2d::make(ParamStore& ps, const std::string& prefix, Pcg32& rng,
                    int64_t cin, int64_t cout, int kh, int kw, int stride_h,
                    int stride_w, int pad_h, int pad_w, int groups, bool bias) {
  Conv2d c;
  c.stride_h = stride_h;
  c.stride_w = stride_w;
  c.pad_h = pad_h;
  c.pad_w = pad_w;
  c.groups = groups;
  int64_t fan_in = (cin / groups) * kh * kw;
  c.w = ps.add(prefix + ".w", uniform_fan_in(rng, {cout, cin / groups, kh, kw}, fan_in));
  if (bias) c.b = ps.add(prefix + ".b", uniform_fan_in(rng, {cout}, fan_in));
  return c;
}

Tensor Conv2d::forward(const Tensor& x) const {
  return ops::conv2d(x, w, b, stride_h, stride_w, pad_h, pad_w, groups);
}

ConvT2d ConvT2d::make(ParamStore& ps, const std::string& prefix, Pcg32& rng,
                      int64_t cin, int64_t cout, int kh, int kw, int stride_h,
                      int stride_w, int pad_h, int pad_w, int groups, bool bias) {
  ConvT2d c;
  c.stride_h = stride_h;
  c.stride_w = stride_w;
  c.pad_h = pad_h;
  c.pad_w = pad_w;
  c.groups = groups;
  int64_t fan_in = (cin / groups) * kh * kw;
  c.w = ps.add(prefix + ".w", uniform_fan_in(rng, {cin, cout / groups, kh, kw}, fan_in));
  if (bias) c.b = ps.add(prefix + ".b", uniform_fan_in(rng, {cout}, fan_in));
  return c;
}

Tensor ConvT2d::forward(const Tensor& x) const {
  return ops::conv_transpose2d(x, w, b, stride_h, stride_w, pad_h, pad_w, groups);
}

ChannelNorm1d ChannelNorm1d::make(ParamStore& ps, const std::string& prefix, int64_t c) {
  ChannelNorm1d n;
  n.g = ps.add(prefix + ".g", Tensor::full({c}, 1.0f));
  n.b = ps.add(prefix + ".b", Tensor::zeros({c}));
  return n;
}

Tensor ChannelNorm1d::forward(const Tensor& x) const {
  return ops::layer_norm_channels(x, g, b, eps);
}

ChannelNorm2d ChannelNorm2d::make(ParamStore& ps, const std::string& prefix, int64_t c) {
  ChannelNorm2d n;
  n.g = ps.add(prefix + ".g", Tensor::full({c}, 1.0f));
  n.b = ps.add(prefix + ".b", Tensor::zeros({c}));
  return n;
}

Tensor ChannelNorm2d::forward(const Tensor& x) const {
  WLDM_CHECK(x.ndim() == 4, "ChannelNorm2d expects (B,C,H,W)");
  int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor flat = ops::reshape(x, {B, C, H * W});
  Tensor normed = ops::layer_norm_channels(flat, g, b, eps);
  return ops::reshape(normed, {B, C, H, W});
}

GroupNorm GroupNorm::make(ParamStore& ps, const std::string& prefix, int64_t c, int groups) {
  GroupNorm n;
  n.groups = groups;
  n.g = ps.add(prefix + ".g", Tensor::full({c}, 1.0f));
  n.b = ps.add(prefix + ".b", Tensor::zeros({c}));
  return n;
}

Tensor GroupNorm::forward(const Tensor& x) const {
  return ops::group_norm(x, g, b, groups, eps);
}

}  // namespace wldm::nn
