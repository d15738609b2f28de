#include <vector>

#include "op_helpers.hpp"
#include "wldm/ops.hpp"

namespace wldm::ops {

namespace {
using detail::finalize;
using detail::make_node;

void check_groups(int64_t cin, int64_t cout, int groups) {
  WLDM_CHECK(groups >= 1 && cin % groups == 0 && cout % groups == 0,
             "channel counts not divisible by groups");
}

// Number of indices t >= 0 with off + t*stride <= limit-1. Plain integer
// division would truncate a negative numerator toward zero and admit one
// out-of-range index when the tap offset lies past the end.
int64_t span_end(int64_t limit, int64_t off, int64_t stride) {
  int64_t num = limit - 1 - off;
  return num < 0 ? 0 : num / stride + 1;
}

}  // namespace

// ---------------------------------------------------------------------------
// conv1d: x (B, Cin, L), w (Cout, Cin/g, k) -> (B, Cout, Lout)
// ---------------------------------------------------------------------------
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b,
              int stride, int padding, int dilation, int groups) {
  WLDM_CHECK(x.ndim() == 3 && w.ndim() == 3, "conv1d expects (B,Cin,L) and (Cout,Cin/g,k)");
  int64_t B = x.dim(0), Cin = x.dim(1), L = x.dim(2);
  int64_t Cout = w.dim(0), Cing = w.dim(1), k = w.dim(2);
  check_groups(Cin, Cout, groups);
  WLDM_CHECK(Cing == Cin / groups, "conv1d weight in-channel extent mismatch");
  if (b.defined()) WLDM_CHECK(b.numel() == Cout, "conv1d bias size mismatch");
  int64_t Lout = (L + 2 * padding - dilation * (k - 1) - 1) / stride + 1;
  WLDM_CHECK(Lout >= 1, "conv1d output would be empty");
  int64_t coutg = Cout / groups;

  Tensor out = make_node({B, Cout, Lout}, {x, w, b}, "conv1d");
  const float* px = x.data().data();
  const float* pw = w.data().data();
  const float* pb = b.defined() ? b.data().data() : nullptr;
  float* po = out.data().data();

  parallel_for_rows(B * Cout, [&](int64_t lo_row, int64_t hi_row) {
    for (int64_t row = lo_row; row < hi_row; ++row) {
      int64_t bi = row / Cout;
      int64_t co = row % Cout;
      int64_t gi = co / coutg;
      float* orow = po + row * Lout;
      float bias = pb ? pb[co] : 0.0f;
      for (int64_t t = 0; t < Lout; ++t) orow[t] = bias;
      for (int64_t cir = 0; cir < Cing; ++cir) {
        const float* xrow = px + (bi * Cin + gi * Cing + cir) * L;
        const float* wrow = pw + (co * Cing + cir) * k;
        for (int64_t j = 0; j < k; ++j) {
          float wv = wrow[j];
          if (wv == 0.0f) continue;
          int64_t off = j * dilation - padding;
          // valid lo: 0 <= lo*stride + off < L
          int64_t t0 = off < 0 ? (-off + stride - 1) / stride : 0;
          int64_t t1 = span_end(L, off, stride);
          if (t1 > Lout) t1 = Lout;
          for (int64_t t = t0; t < t1; ++t) {
            orow[t] += wv * xrow[t * stride + off];
          }
        }
      }
    }
  });

  if (out.requires_grad()) {
    TensorNode* on = out.raw();
    Tensor tx = x, tw = w, tb = b;
    out.node()->backward_fn = [on, tx, tw, tb, B, Cin, L, Cout, Cing, coutg, k, Lout, stride,
                               padding, dilation]() mutable {
      const float* g = on->grad.data();
      const float* px2 = tx.data().data();
      const float* pw2 = tw.data().data();
      if (tx.requires_grad()) {
        float* gx = tx.grad().data();
        parallel_for_rows(B * Cin, [&](int64_t lo_row, int64_t hi_row) {
          for (int64_t row = lo_row; row < hi_row; ++row) {
            int64_t bi = row / Cin;
            int64_t ci = row % Cin;
            int64_t gi = ci / Cing;
            int64_t cir = ci % Cing;
            float* gxrow = gx + row * L;
            for (int64_t cor = 0; cor < coutg; ++cor) {
              int64_t co = gi * coutg + cor;
              const float* grow = g + (bi * Cout + co) * Lout;
              const float* wrow = pw2 + (co * Cing + cir) * k;
              for (int64_t j = 0; j < k; ++j) {
                float wv = wrow[j];
                if (wv == 0.0f) continue;
                int64_t off = j * dilation - padding;
                int64_t t0 = off < 0 ? (-off + stride - 1) / stride : 0;
                int64_t t1 = span_end(L, off, stride);
                if (t1 > Lout) t1 = Lout;
                for (int64_t t = t0; t < t1; ++t) {
                  gxrow[t * stride + off] += wv * grow[t];
                }
              }
            }
          }
        });
      }
      if (tw.requires_grad()) {
        float* gw = tw.grad().data();
        parallel_for_rows(Cout * Cing, [&](int64_t lo_row, int64_t hi_row) {
          for (int64_t row = lo_row; row < hi_row; ++row) {
            int64_t co = row / Cing;
            int64_t cir = row % Cing;
            int64_t gi = co / coutg;
            int64_t ci = gi * Cing + cir;
            for (int64_t j = 0; j < k; ++j) {
              int64_t off = j * dilation - padding;
              int64_t t0 = off < 0 ? (-off + stride - 1) / stride : 0;
              int64_t t1 = span_end(L, off, stride);
              if (t1 > Lout) t1 = Lout;
              double acc = 0.0;
              for (int64_t bi = 0; bi < B; ++bi) {
                const float* grow = g + (bi * Cout + co) * Lout;
                const float* xrow = px2 + (bi * Cin + ci) * L;
                for (int64_t t = t0; t < t1; ++t) {
                  acc += static_cast<double>(grow[t]) * xrow[t * stride + off];
                }
              }
              gw[row * k + j] += static_cast<float>(acc);
            }
          }
        });
      }
      if (tb.defined() && tb.requires_grad()) {
        float* gb = tb.grad().data();
        parallel_for_rows(Cout, [&](int64_t lo_c, int64_t hi_c) {
          for (int64_t co = lo_c; co < hi_c; ++co) {
            double acc = 0.0;
            for (int64_t bi = 0; bi < B; ++bi) {
              const float* grow = g + (bi * Cout + co) * Lout;
              for (int64_t t = 0; t < Lout; ++t) acc += static_cast<double>(grow[t]);
            }
            gb[co] += static_cast<float>(acc);
          }
        });
      }
    };
  }
  finalize(out);
  return out;
}

// ---------------------------------------------------------------------------
// conv_transpose1d: x (B, Cin, L), w (Cin, Cout/g, k) -> (B, Cout, Lout)
// Lout = (L-1)*stride - 2*padding + k
// ---------------------------------------------------------------------------
Tensor conv_transpose1d(const Tensor& x, const Tensor& w, const Tensor& b,
                        int stride, int padding, int groups) {
  WLDM_CHECK(x.ndim() == 3 && w.ndim() == 3, "conv_transpose1d expects (B,Cin,L) and (Cin,Cout/g,k)");
  int64_t B = x.dim(0), Cin = x.dim(1), L = x.dim(2);
  int64_t wcin = w.dim(0), coutg = w.dim(1), k = w.dim(2);
  WLDM_CHECK(wcin == Cin, "conv_transpose1d weight in-channel mismatch");
  int64_t Cout = coutg * groups;
  check_groups(Cin, Cout, groups);
  if (b.defined()) WLDM_CHECK(b.numel() == Cout, "conv_transpose1d bias size mismatch");
  int64_t cing = Cin / groups;
  int64_t Lout = (L - 1) * stride - 2 * padding + k;
  WLDM_CHECK(Lout >= 1, "conv_transpose1d output would be empty");

  Tensor out = make_node({B, Cout, Lout}, {x, w, b}, "conv_transpose1d");
  const float* px = x.data().data();
  const float* pw = w.data().data();
  const float* pb = b.defined() ? b.data().data() : nullptr;
  float* po = out.data().data();

  parallel_for_rows(B * Cout, [&](int64_t lo_row, int64_t hi_row) {
    for (int64_t row = lo_row; row < hi_row; ++row) {
      int64_t bi = row / Cout;
      int64_t co = row % Cout;
      int64_t gi = co / coutg;
      int64_t cor = co % coutg;
      float* orow = po + row * Lout;
      float bias = pb ? pb[co] : 0.0f;
      for (int64_t t = 0; t < Lout; ++t) orow[t] = bias;
      for (int64_t cir = 0; cir < cing; ++cir) {
        int64_t ci = gi * cing + cir;
        const float* xrow = px + (bi * Cin + ci) * L;
        const float* wrow = pw + (ci * coutg + cor) * k;
        for (int64_t j = 0; j < k; ++j) {
          float wv = wrow[j];
          if (wv == 0.0f) continue;
          int64_t off = j - padding;
          // out position: li*stride + off must be in [0, Lout)
          int64_t li0 = off < 0 ? (-off + stride - 1) / stride : 0;
          int64_t li1 = span_end(Lout, off, stride);
          if (li1 > L) li1 = L;
          for (int64_t li = li0; li < li1; ++li) {
            orow[li * stride + off] += wv * xrow[li];
          }
        }
      }
    }
  });

  if (out.requires_grad()) {
    TensorNode* on = out.raw();
    Tensor tx = x, tw = w, tb = b;
    out.node()->backward_fn = [on, tx, tw, tb, B, Cin, L, Cout, cing, coutg, k, Lout, stride,
                               padding]() mutable {
      const float* g = on->grad.data();
      const float* px2 = tx.data().data();
      const float* pw2 = tw.data().data();
      if (tx.requires_grad()) {
        float* gx = tx.grad().data();
        parallel_for_rows(B * Cin, [&](int64_t lo_row, int64_t hi_row) {
          for (int64_t row = lo_row; row < hi_row; ++row) {
            int64_t bi = row / Cin;
            int64_t ci = row % Cin;
            int64_t gi = ci / cing;
            float* gxrow = gx + row * L;
            for (int64_t cor = 0; cor < coutg; ++cor) {
              int64_t co = gi * coutg + cor;
              const float* grow = g + (bi * Cout + co) * Lout;
              const float* wrow = pw2 + (ci * coutg + cor) * k;
              for (int64_t j = 0; j < k; ++j) {
                float wv = wrow[j];
                if (wv == 0.0f) continue;
                int64_t off = j - padding;
                int64_t li0 = off < 0 ? (-off + stride - 1) / stride : 0;
                int64_t li1 = span_end(Lout, off, stride);
                if (li1 > L) li1 = L;
                for (int64_t li = li0; li < li1; ++li) {
                  gxrow[li] += wv * grow[li * stride + off];
                }
              }
            }
          }
        });
      }
      if (tw.requires_grad()) {
        float* gw = tw.grad().data();
        parallel_for_rows(Cin * coutg, [&](int64_t lo_row, int64_t hi_row) {
          for (int64_t row = lo_row; row < hi_row; ++row) {
            int64_t ci = row / coutg;
            int64_t cor = row % coutg;
            int64_t gi = ci / cing;
            int64_t co = gi * coutg + cor;
            for (int64_t j = 0; j < k; ++j) {
              int64_t off = j - padding;
              int64_t li0 = off < 0 ? (-off + stride - 1) / stride : 0;
              int64_t li1 = span_end(Lout, off, stride);
              if (li1 > L) li1 = L;
              double acc = 0.0;
              for (int64_t bi = 0; bi < B; ++bi) {
                const float* xrow = px2 + (bi * Cin + ci) * L;
                const float* grow = g + (bi * Cout + co) * Lout;
                for (int64_t li = li0; li < li1; ++li) {
                  acc += static_cast<double>(xrow[li]) * grow[li * stride + off];
                }
              }
              gw[row * k + j] += static_cast<float>(acc);
            }
          }
        });
      }
      if (tb.defined() && tb.requires_grad()) {
        float* gb = tb.grad().data();
        parallel_for_rows(Cout, [&](int64_t lo_c, int64_t hi_c) {
          for (int64_t co = lo_c; co < hi_c; ++co) {
            double acc = 0.0;
            for (int64_t bi = 0; bi < B; ++bi) {
              const float* grow = g + (bi * Cout + co) * Lout;
              for (int64_t t = 0; t < Lout; ++t) acc += static_cast<double>(grow[t]);
            }
            gb[co] += static_cast<float>(acc);
          }
        });
      }
    };
  }
  finalize(out);
  return out;
}

// ---------------------------------------------------------------------------
// conv2d: x (B, Cin, H, W), w (Cout, Cin/g, kh, kw) -> (B, Cout, Ho, Wo)
// ---------------------------------------------------------------------------
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b,
              int stride_h, int stride_w, int pad_h, int pad_w, int groups) {
  WLDM_CHECK(x.ndim() == 4 && w.ndim() == 4, "conv2d expects (B,Cin,H,W) and (Cout,Cin/g,kh,kw)");
  int64_t B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  int64_t Cout = w.dim(0), Cing = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  check_groups(Cin, Cout, groups);
  WLDM_CHECK(Cing == Cin / groups, "conv2d weight in-channel extent mismatch");
  if (b.defined()) WLDM_CHECK(b.numel() == Cout, "conv2d bias size mismatch");
  int64_t Ho = (H + 2 * pad_h - kh) / stride_h + 1;
  int64_t Wo = (W + 2 * pad_w - kw) / stride_w + 1;
  WLDM_CHECK(Ho >= 1 && Wo >= 1, "conv2d output would be empty");
  int64_t coutg = Cout / groups;

  Tensor out = make_node({B, Cout, Ho, Wo}, {x, w, b}, "conv2d");
  const float* px = x.data().data();
  const float* pw = w.data().data();
  const float* pb = b.defined() ? b.data().data() : nullptr;
  float* po = out.data().data();

  parallel_for_rows(B * Cout, [&](int64_t lo_row, int64_t hi_row) {
    for (int64_t row = lo_row; row < hi_row; ++row) {
      int64_t bi = row / Cout;
      int64_t co = row % Cout;
      int64_t gi = co / coutg;
      float* oplane = po + row * Ho * Wo;
      float bias = pb ? pb[co] : 0.0f;
      for (int64_t t = 0; t < Ho * Wo; ++t) oplane[t] = bias;
      for (int64_t cir = 0; cir < Cing; ++cir) {
        const float* xplane = px + (bi * Cin + gi * Cing + cir) * H * W;
        const float* wplane = pw + (co * Cing + cir) * kh * kw;
        for (int64_t jh = 0; jh < kh; ++jh) {
          for (int64_t jw = 0; jw < kw; ++jw) {
            float wv = wplane[jh * kw + jw];
            if (wv == 0.0f) continue;
            int64_t offh = jh - pad_h;
            int64_t offw = jw - pad_w;
            int64_t h0 = offh < 0 ? (-offh + stride_h - 1) / stride_h : 0;
            int64_t h1 = span_end(H, offh, stride_h);
            if (h1 > Ho) h1 = Ho;
            int64_t w0 = offw < 0 ? (-offw + stride_w - 1) / stride_w : 0;
            int64_t w1 = span_end(W, offw, stride_w);
            if (w1 > Wo) w1 = Wo;
            for (int64_t ho = h0; ho < h1; ++ho) {
              float* orow = oplane + ho * Wo;
              const float* xrow = xplane + (ho * stride_h + offh) * W + offw;
              for (int64_t wo = w0; wo < w1; ++wo) {
                orow[wo] += wv * xrow[wo * stride_w];
              }
            }
          }
        }
      }
    }
  });

  if (out.requires_grad()) {
    TensorNode* on = out.raw();
    Tensor tx = x, tw = w, tb = b;
    int64_t sh = stride_h, sw = stride_w, ph = pad_h, pw_ = pad_w;
    out.node()->backward_fn = [on, tx, tw, tb, B, Cin, H, W, Cout, Cing, coutg, kh, kw, Ho, Wo,
                               sh, sw, ph, pw_]() mutable {
      const float* g = on->grad.data();
      const float* px2 = tx.data().data();
      const float* pw2 = tw.data().data();
      if (tx.requires_grad()) {
        float* gx = tx.grad().data();
        parallel_for_rows(B * Cin, [&](int64_t lo_row, int64_t hi_row) {
          for (int64_t row = lo_row; row < hi_row; ++row) {
            int64_t bi = row / Cin;
            int64_t ci = row % Cin;
            int64_t gi = ci / Cing;
            int64_t cir = ci % Cing;
            float* gxplane = gx + row * H * W;
            for (int64_t cor = 0; cor < coutg; ++cor) {
              int64_t co = gi * coutg + cor;
              const float* gplane = g + (bi * Cout + co) * Ho * Wo;
              const float* wplane = pw2 + (co * Cing + cir) * kh * kw;
              for (int64_t jh = 0; jh < kh; ++jh) {
                for (int64_t jw = 0; jw < kw; ++jw) {
                  float wv = wplane[jh * kw + jw];
                  if (wv == 0.0f) continue;
                  int64_t offh = jh - ph;
                  int64_t offw = jw - pw_;
                  int64_t h0 = offh < 0 ? (-offh + sh - 1) / sh : 0;
                  int64_t h1 = span_end(H, offh, sh);
                  if (h1 > Ho) h1 = Ho;
                  int64_t w0 = offw < 0 ? (-offw + sw - 1) / sw : 0;
                  int64_t w1 = span_end(W, offw, sw);
                  if (w1 > Wo) w1 = Wo;
                  for (int64_t ho = h0; ho < h1; ++ho) {
                    const float* grow = gplane + ho * Wo;
                    float* gxrow = gxplane + (ho * sh + offh) * W + offw;
                    for (int64_t wo = w0; wo < w1; ++wo) {
                      gxrow[wo * sw] += wv * grow[wo];
                    }
                  }
                }
              }
            }
          }
        });
      }
      if (tw.requires_grad()) {
        float* gw = tw.grad().data();
        parallel_for_rows(Cout * Cing, [&](int64_t lo_row, int64_t hi_row) {
          for (int64_t row = lo_row; row < hi_row; ++row) {
            int64_t co = row / Cing;
            int64_t cir = row % Cing;
            int64_t gi = co / coutg;
            int64_t ci = gi * Cing + cir;
            for (int64_t jh = 0; jh < kh; ++jh) {
              for (int64_t jw = 0; jw < kw; ++jw) {
                int64_t offh = jh - ph;
                int64_t offw = jw - pw_;
                int64_t h0 = offh < 0 ? (-offh + sh - 1) / sh : 0;
                int64_t h1 = span_end(H, offh, sh);
                if (h1 > Ho) h1 = Ho;
                int64_t w0 = offw < 0 ? (-offw + sw - 1) / sw : 0;
                int64_t w1 = span_end(W, offw, sw);
                if (w1 > Wo) w1 = Wo;
                double acc = 0.0;
                for (int64_t bi = 0; bi < B; ++bi) {
                  const float* gplane = g + (bi * Cout + co) * Ho * Wo;
                  const float* xplane = px2 + (bi * Cin + ci) * H * W;
                  for (int64_t ho = h0; ho < h1; ++ho) {
                    const float* grow = gplane + ho * Wo;
                    const float* xrow = xplane + (ho * sh + offh) * W + offw;
                    for (int64_t wo = w0; wo < w1; ++wo) {
                      acc += static_cast<double>(grow[wo]) * xrow[wo * sw];
                    }
                  }
                }
                gw[(row * kh + jh) * kw + jw] += static_cast<float>(acc);
              }
            }
          }
        });
      }
      if (tb.defined() && tb.requires_grad()) {
        float* gb = tb.grad().data();
        parallel_for_rows(Cout, [&](int64_t lo_c, int64_t hi_c) {
          for (int64_t co = lo_c; co < hi_c; ++co) {
            double acc = 0.0;
            for (int64_t bi = 0; bi < B; ++bi) {
              const float* gplane = g + (bi * Cout + co) * Ho * Wo;
              for (int64_t t = 0; t < Ho * Wo; ++t) acc += static_cast<double>(gplane[t]);
            }
            gb[co] += static_cast<float>(acc);
          }
        });
      }
    };
  }
  finalize(out);
  return out;
}

// ---------------------------------------------------------------------------
// conv_transpose2d: x (B, Cin, H, W), w (Cin, Cout/g, kh, kw) -> (B, Cout, Ho, Wo)
// Ho = (H-1)*stride_h - 2*pad_h + kh
// ---------------------------------------------------------------------------
Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& b,
                        int stride_h, int stride_w, int pad_h, int pad_w, int groups) {
  WLDM_CHECK(x.ndim() == 4 && w.ndim() == 4,
             "conv_transpose2d expects (B,Cin,H,W) and (Cin,Cout/g,kh,kw)");
  int64_t B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  int64_t wcin = w.dim(0), coutg = w.dim(1), kh = w.dim(2), kw = w.dim(3);
  WLDM_CHECK(wcin == Cin, "conv_transpose2d weight in-channel mismatch");
  int64_t Cout = coutg * groups;
  check_groups(Cin, Cout, groups);
  if (b.defined()) WLDM_CHECK(b.numel() == Cout, "conv_transpose2d bias size mismatch");
  int64_t cing = Cin / groups;
  int64_t Ho = (H - 1) * stride_h - 2 * pad_h + kh;
  int64_t Wo = (W - 1) * stride_w - 2 * pad_w + kw;
  WLDM_CHECK(Ho >= 1 && Wo >= 1, "conv_transpose2d output would be empty");

  Tensor out = make_node({B, Cout, Ho, Wo}, {x, w, b}, "conv_transpose2d");
  const float* px = x.data().data();
  const float* pw = w.data().data();
  const float* pb = b.defined() ? b.data().data() : nullptr;
  float* po = out.data().data();

  parallel_for_rows(B * Cout, [&](int64_t lo_row, int64_t hi_row) {
    for (int64_t row = lo_row; row < hi_row; ++row) {
      int64_t bi = row / Cout;
      int64_t co = row % Cout;
      int64_t gi = co / coutg;
      int64_t cor = co % coutg;
      float* oplane = po + row * Ho * Wo;
      float bias = pb ? pb[co] : 0.0f;
      for (int64_t t = 0; t < Ho * Wo; ++t) oplane[t] = bias;
      for (int64_t cir = 0; cir < cing; ++cir) {
        int64_t ci = gi * cing + cir;
        const float* xplane = px + (bi * Cin + ci) * H * W;
        const float* wplane = pw + (ci * coutg + cor) * kh * kw;
        for (int64_t jh = 0; jh < kh; ++jh) {
          for (int64_t jw = 0; jw < kw; ++jw) {
            float wv = wplane[jh * kw + jw];
            if (wv == 0.0f) continue;
            int64_t offh = jh - pad_h;
            int64_t offw = jw - pad_w;
            int64_t h0 = offh < 0 ? (-offh + stride_h - 1) / stride_h : 0;
            int64_t h1 = span_end(Ho, offh, stride_h);
            if (h1 > H) h1 = H;
            int64_t w0 = offw < 0 ? (-offw + stride_w - 1) / stride_w : 0;
            int64_t w1 = span_end(Wo, offw, stride_w);
            if (w1 > W) w1 = W;
            for (int64_t hi2 = h0; hi2 < h1; ++hi2) {
              const float* xrow = xplane + hi2 * W;
              float* orow = oplane + (hi2 * stride_h + offh) * Wo + offw;
              for (int64_t wi = w0; wi < w1; ++wi) {
                orow[wi * stride_w] += wv * xrow[wi];
              }
            }
          }
        }
      }
    }
  });

  if (out.requires_grad()) {
    TensorNode* on = out.raw();
    Tensor tx = x, tw = w, tb = b;
    int64_t sh = stride_h, sw = stride_w, ph = pad_h, pw_ = pad_w;
    out.node()->backward_fn = [on, tx, tw, tb, B, Cin, H, W, Cout, cing, coutg, kh, kw, Ho, Wo,
                               sh, sw, ph, pw_]() mutable {
      const float* g = on->grad.data();
      const float* px2 = tx.data().data();
      const float* pw2 = tw.data().data();
      if (tx.requires_grad()) {
        float* gx = tx.grad().data();
        parallel_for_rows(B * Cin, [&](int64_t lo_row, int64_t hi_row) {
          for (int64_t row = lo_row; row < hi_row; ++row) {
            int64_t bi = row / Cin;
            int64_t ci = row % Cin;
            int64_t gi = ci / cing;
            float* gxplane = gx + row * H * W;
            for (int64_t cor = 0; cor < coutg; ++cor) {
              int64_t co = gi * coutg + cor;
              const float* gplane = g + (bi * Cout + co) * Ho * Wo;
              const float* wplane = pw2 + (ci * coutg + cor) * kh * kw;
              for (int64_t jh = 0; jh < kh; ++jh) {
                for (int64_t jw = 0; jw < kw; ++jw) {
                  float wv = wplane[jh * kw + jw];
                  if (wv == 0.0f) continue;
                  int64_t offh = jh - ph;
                  int64_t offw = jw - pw_;
                  int64_t h0 = offh < 0 ? (-offh + sh - 1) / sh : 0;
                  int64_t h1 = span_end(Ho, offh, sh);
                  if (h1 > H) h1 = H;
                  int64_t w0 = offw < 0 ? (-offw + sw - 1) / sw : 0;
                  int64_t w1 = span_end(Wo, offw, sw);
                  if (w1 > W) w1 = W;
                  for (int64_t hi2 = h0; hi2 < h1; ++hi2) {
                    float* gxrow = gxplane + hi2 * W;
                    const float* grow = gplane + (hi2 * sh + offh) * Wo + offw;
                    for (int64_t wi = w0; wi < w1; ++wi) {
                      gxrow[wi] += wv * grow[wi * sw];
                    }
                  }
                }
              }
            }
          }
        });
      }
      if (tw.requires_grad()) {
        float* gw = tw.grad().data();
        parallel_for_rows(Cin * coutg, [&](int64_t lo_row, int64_t hi_row) {
          for (int64_t row = lo_row; row < hi_row; ++row) {
            int64_t ci = row / coutg;
            int64_t cor = row % coutg;
            int64_t gi = ci / cing;
            int64_t co = gi * coutg + cor;
            for (int64_t jh = 0; jh < kh; ++jh) {
              for (int64_t jw = 0; jw < kw; ++jw) {
                int64_t offh = jh - ph;
                int64_t offw = jw - pw_;
                int64_t h0 = offh < 0 ? (-offh + sh - 1) / sh : 0;
                int64_t h1 = span_end(Ho, offh, sh);
                if (h1 > H) h1 = H;
                int64_t w0 = offw < 0 ? (-offw + sw - 1) / sw : 0;
                int64_t w1 = span_end(Wo, offw, sw);
                if (w1 > W) w1 = W;
                double acc = 0.0;
                for (int64_t bi = 0; bi < B; ++bi) {
                  const float* xplane = px2 + (bi * Cin + ci) * H * W;
                  const float* gplane = g + (bi * Cout + co) * Ho * Wo;
                  for (int64_t hi2 = h0; hi2 < h1; ++hi2) {
                    const float* xrow = xplane + hi2 * W;
                    const float* grow = gplane + (hi2 * sh + offh) * Wo + offw;
                    for (int64_t wi = w0; wi < w1; ++wi) {
                      acc += static_cast<double>(xrow[wi]) * grow[wi * sw];
                    }
                  }
                }
                gw[(row * kh + jh) * kw + jw] += static_cast<float>(acc);
              }
            }
          }
        });
      }
      if (tb.defined() && tb.requires_grad()) {
        float* gb = tb.grad().data();
        parallel_for_rows(Cout, [&](int64_t lo_c, int64_t hi_c) {
          for (int64_t co = lo_c; co < hi_c; ++co) {
            double acc = 0.0;
            for (int64_t bi = 0; bi < B; ++bi) {
              const float* gplane = g + (bi * Cout + co) * Ho * Wo;
              for (int64_t t = 0; t < Ho * Wo; ++t) acc += static_cast<double>(gplane[t]);
            }
            gb[co] += static_cast<float>(acc);
          }
        });
      }
    };
  }
  finalize(out);
  return out;
}

// ---------------------------------------------------------------------------
// matmul: (..., M, K) x (..., K, N) -> (..., M, N)
// ---------------------------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b) {
  int nd_a = a.ndim(), nd_b = b.ndim();
  WLDM_CHECK(nd_a >= 2 && nd_a == nd_b, "matmul rank mismatch");
  for (int i = 0; i < nd_a - 2; ++i) {
    WLDM_CHECK(a.dim(i) == b.dim(i), "matmul batch dim mismatch");
  }
  int64_t M = a.dim(nd_a - 2), K = a.dim(nd_a - 1);
  int64_t K2 = b.dim(nd_b - 2), N = b.dim(nd_b - 1);
  WLDM_CHECK(K == K2, "matmul inner dim mismatch: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  int64_t batch = a.numel() / (M * K);
  Shape oshape(a.shape().begin(), a.shape().end() - 2);
  oshape.push_back(M);
  oshape.push_back(N);

  Tensor out = make_node(oshape, {a, b}, "matmul");
  const float* pa = a.data().data();
  const float* pb = b.data().data();
  float* po = out.data().data();

  parallel_for_rows(batch * M, [&](int64_t lo_row, int64_t hi_row) {
    for (int64_t row = lo_row; row < hi_row; ++row) {
      int64_t bt = row / M;
      int64_t m = row % M;
      const float* arow = pa + (bt * M + m) * K;
      const float* bmat = pb + bt * K * N;
      float* orow = po + row * N;
      for (int64_t n = 0; n < N; ++n) {
        double acc = 0.0;
        for (int64_t k = 0; k < K; ++k) {
          acc += static_cast<double>(arow[k]) * bmat[k * N + n];
        }
        orow[n] = static_cast<float>(acc);
      }
    }
  });

  if (out.requires_grad()) {
    TensorNode* on = out.raw();
    Tensor ta = a, tb = b;
    out.node()->backward_fn = [on, ta, tb, batch, M, K, N]() mutable {
      const float* g = on->grad.data();
      const float* pa2 = ta.data().data();
      const float* pb2 = tb.data().data();
      if (ta.requires_grad()) {
        float* ga = ta.grad().data();
        parallel_for_rows(batch * M, [&](int64_t lo_row, int64_t hi_row) {
          for (int64_t row = lo_row; row < hi_row; ++row) {
            int64_t bt = row / M;
            const float* grow = g + row * N;
            const float* bmat = pb2 + bt * K * N;
            float* garow = ga + row * K;
            for (int64_t k = 0; k < K; ++k) {
              double acc = 0.0;
              const float* brow = bmat + k * N;
              for (int64_t n = 0; n < N; ++n) {
                acc += static_cast<double>(grow[n]) * brow[n];
              }
              garow[k] += static_cast<float>(acc);
            }
          }
        });
      }
      if (tb.requires_grad()) {
        float* gb = tb.grad().data();
        parallel_for_rows(batch * K, [&](int64_t lo_row, int64_t hi_row) {
          for (int64_t row = lo_row; row < hi_row; ++row) {
            int64_t bt = row / K;
            int64_t k = row % K;
            const float* amat = pa2 + bt * M * K;
            const float* gmat = g + bt * M * N;
            float* gbrow = gb + row * N;
            std::vector<double> acc(static_cast<size_t>(N), 0.0);
            for (int64_t m = 0; m < M; ++m) {
              double av = static_cast<double>(amat[m * K + k]);
              const float* grow = gmat + m * N;
              for (int64_t n = 0; n < N; ++n) {
                acc[static_cast<size_t>(n)] += av * grow[n];
              }
            }
            for (int64_t n = 0; n < N; ++n) {
              gbrow[n] += static_cast<float>(acc[static_cast<size_t>(n)]);
            }
          }
        });
      }
    };
  }
  finalize(out);
  return out;
}

}  // namespace wldm::ops
