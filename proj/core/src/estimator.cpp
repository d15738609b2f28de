#include "wldm/estimator.hpp"

#include <cmath>

#include "wldm/common.hpp"

namespace wldm::estimator {

using namespace wldm::ops;

std::vector<float> sinusoidal_embed(int64_t t, int64_t width) {
  WLDM_CHECK(width > 0 && width % 2 == 0, "embedding width must be even and positive");
  int64_t half = width / 2;
  std::vector<float> e(static_cast<size_t>(width));
  for (int64_t i = 0; i < half; ++i) {
    double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) /
                           static_cast<double>(half));
    double a = static_cast<double>(t) * freq;
    e[static_cast<size_t>(2 * i)] = static_cast<float>(std::sin(a));
    e[static_cast<size_t>(2 * i + 1)] = static_cast<float>(std::cos(a));
  }
  return e;
}

Tensor sinusoidal_embed_batch(const std::vector<int64_t>& ts, int64_t width) {
  int64_t b = static_cast<int64_t>(ts.size());
  WLDM_CHECK(b > 0, "embedding wants at least one timestep");
  std::vector<float> data;
  data.reserve(static_cast<size_t>(b * width));
  for (int64_t t : ts) {
    auto e = sinusoidal_embed(t, width);
    data.insert(data.end(), e.begin(), e.end());
  }
  return Tensor::from_data({b, width}, std::move(data));
}

Tensor film(const Tensor& u, const Tensor& gamma, const Tensor& beta) {
  WLDM_CHECK(u.shape() == gamma.shape() && u.shape() == beta.shape(),
             "film wants matching shapes, got " + shape_str(u.shape()) + " / " +
                 shape_str(gamma.shape()) + " / " + shape_str(beta.shape()));
  return add(mul(u, add_scalar(gamma, 1.0f)), beta);
}

Tensor linear_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  WLDM_CHECK(q.ndim() == 3 && q.shape() == k.shape() && q.shape() == v.shape(),
             "linear attention wants three (G, L, h) tensors");
  Tensor qf = elu_plus_one(q);
  Tensor kf = elu_plus_one(k);
  Tensor kt = permute(kf, {0, 2, 1});
  Tensor num = matmul(qf, matmul(kt, v));
  Tensor ones = Tensor::full({q.dim(0), q.dim(1), 1}, 1.0f);
  Tensor den = matmul(qf, matmul(kt, ones));
  return div(num, den);
}

TConvNeXtBlock2d TConvNeXtBlock2d::make(nn::ParamStore& ps, const std::string& prefix,
                                        Pcg32& rng, int64_t channels, int64_t time_width,
                                        int64_t cond_channels, float drop_path_rate) {
  TConvNeXtBlock2d b;
  b.dw = nn::Conv2d::make(ps, prefix + ".dw", rng, channels, channels, 7, 7, 1, 1, 3, 3,
                          static_cast<int>(channels));
  b.norm = nn::ChannelNorm2d::make(ps, prefix + ".norm", channels);
  b.film_conv = nn::Conv2d::make(ps, prefix + ".film", rng, time_width + cond_channels,
                                 2 * channels, 1, 1);
  b.pw1 = nn::Conv2d::make(ps, prefix + ".pw1", rng, channels, 4 * channels, 1, 1);
  b.pw2 = nn::Conv2d::make(ps, prefix + ".pw2", rng, 4 * channels, channels, 1, 1);
  nn::fill_param(b.pw2.w, 0.0f);
  nn::fill_param(b.pw2.b, 0.0f);
  b.drop_path_rate = drop_path_rate;
  return b;
}

Tensor TConvNeXtBlock2d::forward(const Tensor& x, const Tensor& temb, const Tensor& cond,
                                 const nn::TrainContext& ctx) const {
  WLDM_CHECK(x.ndim() == 4, "block wants (B, C, H, W), got " + shape_str(x.shape()));
  WLDM_CHECK(cond.ndim() == 3, "conditioning wants (B, C, L), got " + shape_str(cond.shape()));
  int64_t c = x.dim(1), h = x.dim(2), w = x.dim(3);

  Tensor u = norm.forward(dw.forward(x));

  Tensor tmap = interpolate_nearest2d(reshape(temb, {temb.dim(0), temb.dim(1), 1, 1}), h, w);
  Tensor cmap = interpolate_nearest2d(reshape(cond, {cond.dim(0), cond.dim(1), 1, cond.dim(2)}), h, w);
  Tensor gb = film_conv.forward(concat({tmap, cmap}, 1));
  Tensor gamma = narrow(gb, 1, 0, c);
  Tensor beta = narrow(gb, 1, c, c);

  Tensor y = film(u, gamma, beta);
  y = pw2.forward(gelu(pw1.forward(y)));
  if (ctx.training && drop_path_rate > 0.0f && ctx.rng != nullptr) {
    float keep = 1.0f - drop_path_rate;
    std::vector<float> mask(static_cast<size_t>(x.dim(0)));
    for (auto& m : mask) m = ctx.rng->uniform() < keep ? 1.0f : 0.0f;
    y = drop_path(y, mask, keep);
  }
  return add(x, y);
}

ResBlock2d ResBlock2d::make(nn::ParamStore& ps, const std::string& prefix, Pcg32& rng,
                            int64_t cin, int64_t cout, int64_t time_width) {
  ResBlock2d b;
  b.gn1 = nn::GroupNorm::make(ps, prefix + ".gn1", cin, 8);
  b.conv1 = nn::Conv2d::make(ps, prefix + ".conv1", rng, cin, cout, 3, 3, 1, 1, 1, 1);
  b.tproj = nn::Conv1d::make(ps, prefix + ".tproj", rng, time_width, cout, 1);
  b.gn2 = nn::GroupNorm::make(ps, prefix + ".gn2", cout, 8);
  b.conv2 = nn::Conv2d::make(ps, prefix + ".conv2", rng, cout, cout, 3, 3, 1, 1, 1, 1);
  b.has_skip = cin != cout;
  if (b.has_skip)
    b.skip = nn::Conv2d::make(ps, prefix + ".skip", rng, cin, cout, 1, 1);
  return b;
}

Tensor ResBlock2d::forward(const Tensor& x, const Tensor& temb) const {
  Tensor h = conv1.forward(silu(gn1.forward(x)));
  Tensor tb = tproj.forward(reshape(temb, {temb.dim(0), temb.dim(1), 1}));
  h = add(h, reshape(tb, {tb.dim(0), tb.dim(1), 1, 1}));
  h = conv2.forward(silu(gn2.forward(h)));
  Tensor s = has_skip ? skip.forward(x) : x;
  return add(s, h);
}

RotaryAttention2d RotaryAttention2d::make(nn::ParamStore& ps, const std::string& prefix,
                                          Pcg32& rng, int64_t channels, int heads) {
  WLDM_CHECK(heads >= 1 && channels % heads == 0,
             "attention wants channels divisible by heads");
  WLDM_CHECK((channels / heads) % 2 == 0, "attention head dim must be even for rotation");
  RotaryAttention2d a;
  a.norm = nn::GroupNorm::make(ps, prefix + ".norm", channels, 8);
  a.q = nn::Conv2d::make(ps, prefix + ".q", rng, channels, channels, 1, 1);
  a.k = nn::Conv2d::make(ps, prefix + ".k", rng, channels, channels, 1, 1);
  a.v = nn::Conv2d::make(ps, prefix + ".v", rng, channels, channels, 1, 1);
  a.out = nn::Conv2d::make(ps, prefix + ".out", rng, channels, channels, 1, 1);
  nn::fill_param(a.out.w, 0.0f);
  nn::fill_param(a.out.b, 0.0f);
  a.heads = heads;
  return a;
}

Tensor RotaryAttention2d::forward(const Tensor& x) const {
  int64_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  int64_t hd = c / heads;

  // (B, C, H, W) -> (B*H*heads, W, hd): attention runs along the time axis W,
  // with the feature rows H and the heads folded into the batch.
  auto to_seq = [&](const Tensor& t) {
    Tensor r = reshape(t, {b, heads, hd, h, w});
    r = permute(r, {0, 3, 1, 4, 2});
    return reshape(r, {b * h * heads, w, hd});
  };

  Tensor n = norm.forward(x);
  std::vector<float> pos(static_cast<size_t>(w));
  for (int64_t i = 0; i < w; ++i) pos[static_cast<size_t>(i)] = static_cast<float>(i);
  Tensor qs = rope_rotate(to_seq(q.forward(n)), pos, 10000.0f);
  Tensor ks = rope_rotate(to_seq(k.forward(n)), pos, 10000.0f);
  Tensor vs = to_seq(v.forward(n));

  Tensor att = linear_attention(qs, ks, vs);
  att = reshape(att, {b, h, heads, w, hd});
  att = permute(att, {0, 2, 4, 1, 3});
  att = reshape(att, {b, c, h, w});
  return add(x, out.forward(att));
}

UNet UNet::make(const UNetConfig& cfg, uint64_t seed) {
  WLDM_CHECK(cfg.stages >= 1, "unet wants at least one stage");
  WLDM_CHECK(cfg.c_base % 8 == 0, "c_base must be a multiple of 8 (group norm, rotary heads)");
  UNet u;
  u.cfg = cfg;
  Pcg32 rng(seed);
  auto& ps = u.params;

  u.in_proj = nn::Conv2d::make(ps, "unet.in", rng, 1, cfg.c_base, 3, 3, 1, 1, 1, 1);
  int64_t ch = cfg.c_base;
  for (int i = 0; i < cfg.stages; ++i) {
    std::string p = "unet.d" + std::to_string(i);
    DownStage s;
    s.res = ResBlock2d::make(ps, p + ".res", rng, ch, ch, cfg.time_width);
    s.tcn = TConvNeXtBlock2d::make(ps, p + ".tcn", rng, ch, cfg.time_width,
                                   cfg.cond_channels, cfg.drop_path);
    s.attn = RotaryAttention2d::make(ps, p + ".attn", rng, ch, cfg.heads);
    s.down = nn::Conv2d::make(ps, p + ".down", rng, ch, 2 * ch, 3, 3, 2, 2, 1, 1);
    u.downs.push_back(std::move(s));
    ch *= 2;
  }
  u.mid_res = ResBlock2d::make(ps, "unet.mid.res", rng, ch, ch, cfg.time_width);
  u.mid_tcn = TConvNeXtBlock2d::make(ps, "unet.mid.tcn", rng, ch, cfg.time_width,
                                     cfg.cond_channels, cfg.drop_path);
  u.mid_attn = RotaryAttention2d::make(ps, "unet.mid.attn", rng, ch, cfg.heads);
  for (int i = cfg.stages - 1; i >= 0; --i) {
    std::string p = "unet.u" + std::to_string(i);
    UpStage s;
    s.up = nn::ConvT2d::make(ps, p + ".up", rng, ch, ch / 2, 4, 4, 2, 2, 1, 1);
    s.res = ResBlock2d::make(ps, p + ".res", rng, ch, ch / 2, cfg.time_width);
    s.tcn = TConvNeXtBlock2d::make(ps, p + ".tcn", rng, ch / 2, cfg.time_width,
                                   cfg.cond_channels, cfg.drop_path);
    s.attn = RotaryAttention2d::make(ps, p + ".attn", rng, ch / 2, cfg.heads);
    u.ups.push_back(std::move(s));
    ch /= 2;
  }
  u.out_proj = nn::Conv2d::make(ps, "unet.out", rng, cfg.c_base, 1, 3, 3, 1, 1, 1, 1);
  nn::fill_param(u.out_proj.w, 0.0f);
  nn::fill_param(u.out_proj.b, 0.0f);
  return u;
}

Tensor UNet::forward(const Tensor& z_t, const Tensor& cond,
                     const std::vector<int64_t>& ts, const nn::TrainContext& ctx) const {
  WLDM_CHECK(z_t.ndim() == 3, "unet wants (B, d, L), got " + shape_str(z_t.shape()));
  int64_t b = z_t.dim(0), d = z_t.dim(1), l = z_t.dim(2);
  int64_t div = int64_t{1} << cfg.stages;
  WLDM_CHECK(d % div == 0 && l % div == 0,
             "unet wants d and L divisible by " + std::to_string(div) + ", got (" +
                 std::to_string(d) + ", " + std::to_string(l) + "); pad the latent first");
  WLDM_CHECK(static_cast<int64_t>(ts.size()) == b, "one timestep per batch element");
  WLDM_CHECK(cond.ndim() == 3 && cond.dim(0) == b && cond.dim(1) == cfg.cond_channels,
             "conditioning wants (B, " + std::to_string(cfg.cond_channels) + ", L), got " +
                 shape_str(cond.shape()));

  Tensor temb = sinusoidal_embed_batch(ts, cfg.time_width);
  Tensor h = in_proj.forward(reshape(z_t, {b, 1, d, l}));

  std::vector<Tensor> skips;
  for (const auto& s : downs) {
    h = s.res.forward(h, temb);
    h = s.tcn.forward(h, temb, cond, ctx);
    h = s.attn.forward(h);
    skips.push_back(h);
    h = s.down.forward(h);
  }
  h = mid_res.forward(h, temb);
  h = mid_tcn.forward(h, temb, cond, ctx);
  h = mid_attn.forward(h);
  for (size_t i = 0; i < ups.size(); ++i) {
    const auto& s = ups[i];
    h = s.up.forward(h);
    h = concat({h, skips[skips.size() - 1 - i]}, 1);
    h = s.res.forward(h, temb);
    h = s.tcn.forward(h, temb, cond, ctx);
    h = s.attn.forward(h);
  }
  Tensor out = out_proj.forward(h);
  return reshape(out, {b, d, l});
}

}  // namespace wldm::estimator
