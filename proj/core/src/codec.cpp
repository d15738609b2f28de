#include "wldm/codec.hpp"

#include <cmath>

#include "wldm/common.hpp"

namespace wldm::codec {

using namespace wldm::ops;

ConvNeXtBlock1d ConvNeXtBlock1d::make(nn::ParamStore& ps, const std::string& prefix,
                                      Pcg32& rng, int64_t channels, float gamma_init,
                                      float drop_path_rate) {
  ConvNeXtBlock1d b;
  b.dw = nn::Conv1d::make(ps, prefix + ".dw", rng, channels, channels, 7, 1, 3, 1,
                          static_cast<int>(channels));
  b.norm = nn::ChannelNorm1d::make(ps, prefix + ".norm", channels);
  b.pw1 = nn::Conv1d::make(ps, prefix + ".pw1", rng, channels, 4 * channels, 1);
  b.pw2 = nn::Conv1d::make(ps, prefix + ".pw2", rng, 4 * channels, channels, 1);
  b.gamma = ps.add(prefix + ".gamma", Tensor::full({channels}, gamma_init));
  b.drop_path_rate = drop_path_rate;
  return b;
}

Tensor ConvNeXtBlock1d::forward(const Tensor& x, const nn::TrainContext& ctx) const {
  Tensor h = dw.forward(x);
  h = norm.forward(h);
  h = pw1.forward(h);
  h = gelu(h);
  h = pw2.forward(h);
  h = scale_channels(h, gamma);
  if (ctx.training && drop_path_rate > 0.0f && ctx.rng != nullptr) {
    float keep = 1.0f - drop_path_rate;
    std::vector<float> mask(static_cast<size_t>(x.dim(0)));
    for (auto& m : mask) m = ctx.rng->uniform() < keep ? 1.0f : 0.0f;
    h = drop_path(h, mask, keep);
  }
  return add(x, h);
}

Encoder Encoder::make(nn::ParamStore& ps, const std::string& prefix, Pcg32& rng,
                      const CodecConfig& cfg) {
  WLDM_CHECK(!cfg.enc_widths.empty() && cfg.enc_widths.size() == cfg.enc_blocks.size(),
             "encoder wants matching width/block lists");
  Encoder e;
  e.stem = nn::Conv1d::make(ps, prefix + ".stem", rng, cfg.n_mel, cfg.enc_widths[0], 7, 1, 3);
  e.stem_norm = nn::ChannelNorm1d::make(ps, prefix + ".stem_norm", cfg.enc_widths[0]);
  for (size_t i = 0; i < cfg.enc_widths.size(); ++i) {
    if (i > 0) {
      e.transitions.push_back(nn::Conv1d::make(ps, prefix + ".t" + std::to_string(i), rng,
                                               cfg.enc_widths[i - 1], cfg.enc_widths[i], 1));
    }
    std::vector<ConvNeXtBlock1d> stage;
    for (int64_t j = 0; j < cfg.enc_blocks[i]; ++j) {
      stage.push_back(ConvNeXtBlock1d::make(
          ps, prefix + ".s" + std::to_string(i) + ".b" + std::to_string(j), rng,
          cfg.enc_widths[i], cfg.gamma_init, cfg.drop_path));
    }
    e.stages.push_back(std::move(stage));
  }
  e.final_norm = nn::ChannelNorm1d::make(ps, prefix + ".final_norm", cfg.enc_widths.back());
  e.proj = nn::Conv1d::make(ps, prefix + ".proj", rng, cfg.enc_widths.back(), cfg.d, 1);
  return e;
}

Tensor Encoder::forward(const Tensor& mel, const nn::TrainContext& ctx) const {
  WLDM_CHECK(mel.ndim() == 3 && mel.dim(1) == stem.w.dim(1),
             "encoder input wants (B, n_mel, L), got " + shape_str(mel.shape()));
  Tensor h = stem.forward(mel);
  h = stem_norm.forward(h);
  for (size_t i = 0; i < stages.size(); ++i) {
    if (i > 0) h = transitions[i - 1].forward(h);
    for (const auto& block : stages[i]) h = block.forward(h, ctx);
  }
  h = final_norm.forward(h);
  return proj.forward(h);
}

Gfsq Gfsq::make(const std::vector<int>& levels, int groups) {
  WLDM_CHECK(!levels.empty() && groups >= 1, "quantizer wants levels and groups >= 1");
  for (int l : levels) WLDM_CHECK(l >= 2, "quantizer levels must be >= 2");
  Gfsq q;
  q.levels = levels;
  q.groups = groups;
  for (int g = 0; g < groups; ++g)
    for (int l : levels) q.channel_half.push_back(static_cast<float>(l / 2));
  return q;
}

Gfsq::Result Gfsq::quantize(const Tensor& z) const {
  int64_t c = static_cast<int64_t>(levels.size()) * groups;
  WLDM_CHECK(z.ndim() == 3 && z.dim(1) == c,
             "quantizer wants (B, " + std::to_string(c) + ", L), got " + shape_str(z.shape()));
  Tensor half = Tensor::from_data({c}, channel_half);
  Tensor soft = scale_channels(tanh_act(z), half);

  std::vector<float> hard_data(soft.data().size());
  for (size_t i = 0; i < hard_data.size(); ++i)
    hard_data[i] = std::round(soft.data()[i]);
  Tensor hard = Tensor::from_data(soft.shape(), hard_data);

  Result r;
  r.values = ste_compose(soft, hard);
  r.index_shape = z.shape();
  r.indices.resize(hard_data.size());
  int64_t spatial = z.dim(2);
  for (size_t i = 0; i < hard_data.size(); ++i) {
    int64_t ch = (static_cast<int64_t>(i) / spatial) % c;
    r.indices[i] = static_cast<int32_t>(hard_data[i]) +
                   static_cast<int32_t>(channel_half[static_cast<size_t>(ch)]);
  }
  return r;
}

Tensor Gfsq::from_indices(const std::vector<int32_t>& indices, const Shape& shape) const {
  int64_t c = static_cast<int64_t>(levels.size()) * groups;
  WLDM_CHECK(shape.size() == 3 && shape[1] == c && numel(shape) == static_cast<int64_t>(indices.size()),
             "index shape mismatch");
  std::vector<float> data(indices.size());
  int64_t spatial = shape[2];
  for (size_t i = 0; i < indices.size(); ++i) {
    int64_t ch = (static_cast<int64_t>(i) / spatial) % c;
    int g = static_cast<int>(ch / static_cast<int64_t>(levels.size()));
    int within = static_cast<int>(ch % static_cast<int64_t>(levels.size()));
    data[i] = codebook(g, within)[static_cast<size_t>(indices[i])];
  }
  return Tensor::from_data(shape, data);
}

std::vector<float> Gfsq::codebook(int group, int channel) const {
  WLDM_CHECK(group >= 0 && group < groups, "codebook group out of range");
  WLDM_CHECK(channel >= 0 && channel < static_cast<int>(levels.size()),
             "codebook channel out of range");
  int half = levels[static_cast<size_t>(channel)] / 2;
  std::vector<float> table;
  for (int k = -half; k <= half; ++k) table.push_back(static_cast<float>(k));
  return table;
}

FDown FDown::make(nn::ParamStore& ps, const std::string& prefix, Pcg32& rng,
                  const CodecConfig& cfg) {
  WLDM_CHECK(cfg.down_factor >= 1, "down_factor must be >= 1");
  FDown f;
  int k = 2 * cfg.down_factor;
  f.down = nn::Conv1d::make(ps, prefix + ".down", rng, cfg.d, cfg.c_down, k,
                            cfg.down_factor, cfg.down_factor / 2);
  return f;
}

Tensor FDown::forward(const Tensor& z) const { return down.forward(z); }

FUp FUp::make(nn::ParamStore& ps, const std::string& prefix, Pcg32& rng,
              const CodecConfig& cfg) {
  FUp f;
  int k = 2 * cfg.down_factor;
  f.up = nn::ConvT1d::make(ps, prefix + ".up", rng, cfg.fsq_channels(), cfg.c_down, k,
                           cfg.down_factor, cfg.down_factor / 2);
  f.proj = nn::Conv1d::make(ps, prefix + ".proj", rng, cfg.c_down, cfg.d, 1);
  return f;
}

Tensor FUp::forward(const Tensor& z_hat) const {
  return proj.forward(up.forward(z_hat));
}

ParallelBlock ParallelBlock::make(nn::ParamStore& ps, const std::string& prefix,
                                  Pcg32& rng, int64_t channels) {
  ParallelBlock p;
  p.c3 = nn::Conv1d::make(ps, prefix + ".c3", rng, channels, channels, 3, 1, 1);
  p.c7 = nn::Conv1d::make(ps, prefix + ".c7", rng, channels, channels, 7, 1, 3);
  p.c11 = nn::Conv1d::make(ps, prefix + ".c11", rng, channels, channels, 11, 1, 5);
  return p;
}

Tensor ParallelBlock::forward(const Tensor& x) const {
  return silu(add(add(c3.forward(x), c7.forward(x)), c11.forward(x)));
}

Decoder Decoder::make(nn::ParamStore& ps, const std::string& prefix, Pcg32& rng,
                      const CodecConfig& cfg) {
  WLDM_CHECK(cfg.dec_channels.size() == cfg.dec_factors.size(),
             "decoder wants matching channel/factor lists");
  int64_t total = 1;
  for (int64_t f : cfg.dec_factors) total *= f;
  WLDM_CHECK(total == cfg.hop,
             "decoder upsample factors must multiply to hop = " + std::to_string(cfg.hop));
  Decoder d;
  d.pre = nn::Conv1d::make(ps, prefix + ".pre", rng, cfg.d, cfg.dec_init_channels, 7, 1, 3);
  int64_t ch = cfg.dec_init_channels;
  for (size_t i = 0; i < cfg.dec_factors.size(); ++i) {
    int f = static_cast<int>(cfg.dec_factors[i]);
    WLDM_CHECK(f % 2 == 0, "decoder upsample factors must be even");
    Stage s;
    s.up = nn::ConvT1d::make(ps, prefix + ".s" + std::to_string(i) + ".up", rng, ch,
                             cfg.dec_channels[i], 2 * f, f, f / 2);
    s.pb = ParallelBlock::make(ps, prefix + ".s" + std::to_string(i) + ".pb", rng,
                               cfg.dec_channels[i]);
    d.stages.push_back(std::move(s));
    ch = cfg.dec_channels[i];
  }
  d.post = nn::Conv1d::make(ps, prefix + ".post", rng, ch, 1, 7, 1, 3);
  nn::fill_param(d.post.w, 0.0f);
  nn::fill_param(d.post.b, 0.0f);
  return d;
}

Tensor Decoder::forward(const Tensor& z_q) const {
  Tensor h = pre.forward(z_q);
  for (const auto& s : stages) {
    h = silu(s.up.forward(h));
    h = s.pb.forward(h);
  }
  return tanh_act(post.forward(h));
}

Codec Codec::make(const CodecConfig& cfg, uint64_t seed) {
  Codec c;
  c.cfg = cfg;
  Pcg32 rng(seed);
  c.encoder = Encoder::make(c.params, "codec.encoder", rng, cfg);
  c.fdown = FDown::make(c.params, "codec.fdown", rng, cfg);
  c.fsq_proj = nn::Conv1d::make(c.params, "codec.fsq_proj", rng, cfg.c_down,
                                cfg.fsq_channels(), 1);
  c.gfsq = Gfsq::make(cfg.levels, cfg.groups);
  c.fup = FUp::make(c.params, "codec.fup", rng, cfg);
  c.decoder = Decoder::make(c.params, "codec.decoder", rng, cfg);
  c.mel_fb = dsp::mel_filterbank(static_cast<int>(cfg.n_mel), cfg.n_fft, cfg.sample_rate,
                                 cfg.fmin, cfg.fmax);
  return c;
}

Tensor Codec::mel(const Tensor& wave) const {
  Tensor x = wave;
  if (x.ndim() == 3) {
    WLDM_CHECK(x.dim(1) == 1, "mel wants mono waveforms (B, 1, N)");
    x = reshape(x, {x.dim(0), x.dim(2)});
  }
  WLDM_CHECK(x.ndim() == 2, "mel wants (B, N) or (B, 1, N), got " + shape_str(wave.shape()));
  WLDM_CHECK(x.dim(1) % cfg.hop == 0,
             "waveform length " + std::to_string(x.dim(1)) + " is not a multiple of hop " +
                 std::to_string(cfg.hop) + "; pad the input first");
  int64_t frames = x.dim(1) / cfg.hop;
  Tensor mag = dsp::stft_magnitude(x, cfg.n_fft, cfg.win_length, cfg.hop);
  Tensor lm = dsp::log_mel(mag, mel_fb, cfg.n_mel, cfg.mel_floor);
  return narrow(lm, 2, 0, frames);
}

Tensor Codec::encode(const Tensor& mel_in, const nn::TrainContext& ctx) const {
  return encoder.forward(mel_in, ctx);
}

Tensor Codec::downsample(const Tensor& z) const { return fdown.forward(z); }

Gfsq::Result Codec::quantize_latent(const Tensor& z_down) const {
  return gfsq.quantize(fsq_proj.forward(z_down));
}

Tensor Codec::upsample(const Tensor& z_hat) const { return fup.forward(z_hat); }

Tensor Codec::decode(const Tensor& z_q) const { return decoder.forward(z_q); }

Codec::ForwardOut Codec::forward(const Tensor& wave, const nn::TrainContext& ctx) const {
  ForwardOut out;
  Tensor m = mel(wave);
  out.z = encode(m, ctx);
  out.z_down = downsample(out.z);
  Gfsq::Result q = quantize_latent(out.z_down);
  out.z_hat = q.values;
  out.indices = std::move(q.indices);
  out.index_shape = std::move(q.index_shape);
  out.x_hat = decode(upsample(out.z_hat));
  return out;
}

}  // namespace wldm::codec
