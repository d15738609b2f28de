#include <cmath>
#include <vector>

#include "op_helpers.hpp"
#include "wldm/ops.hpp"

namespace wldm::ops {

namespace {
using detail::finalize;
using detail::make_node;
}  // namespace

// ---------------------------------------------------------------------------
// layer_norm over the trailing `norm_axes` axes. Row statistics are computed
// in double (biased variance) and the saved mean/invstd are reused by the
// backward pass.
// ---------------------------------------------------------------------------
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  int norm_axes, float eps) {
  int nd = x.ndim();
  WLDM_CHECK(norm_axes >= 1 && norm_axes <= nd, "layer_norm axes out of range");
  int64_t inner = 1;
  for (int i = nd - norm_axes; i < nd; ++i) inner *= x.dim(i);
  int64_t rows = x.numel() / inner;
  WLDM_CHECK(gamma.numel() == inner && beta.numel() == inner, "layer_norm affine size mismatch");

  Tensor out = make_node(x.shape(), {x, gamma, beta}, "layer_norm");
  auto mean = std::make_shared<std::vector<float>>(static_cast<size_t>(rows));
  auto invstd = std::make_shared<std::vector<float>>(static_cast<size_t>(rows));
  const float* px = x.data().data();
  const float* pg = gamma.data().data();
  const float* pbt = beta.data().data();
  float* po = out.data().data();

  parallel_for_rows(rows, [&](int64_t lo, int64_t hi) {
    for (int64_t r = lo; r < hi; ++r) {
      const float* xr = px + r * inner;
      double mu = 0.0;
      for (int64_t i = 0; i < inner; ++i) mu += static_cast<double>(xr[i]);
      mu /= static_cast<double>(inner);
      double var = 0.0;
      for (int64_t i = 0; i < inner; ++i) {
        double d = static_cast<double>(xr[i]) - mu;
        var += d * d;
      }
      var /= static_cast<double>(inner);
      float m = static_cast<float>(mu);
      float is = static_cast<float>(1.0 / std::sqrt(var + static_cast<double>(eps)));
      (*mean)[static_cast<size_t>(r)] = m;
      (*invstd)[static_cast<size_t>(r)] = is;
      float* orow = po + r * inner;
      for (int64_t i = 0; i < inner; ++i) {
        orow[i] = (xr[i] - m) * is * pg[i] + pbt[i];
      }
    }
  });

  if (out.requires_grad()) {
    TensorNode* on = out.raw();
    Tensor tx = x, tg = gamma, tb = beta;
    out.node()->backward_fn = [on, tx, tg, tb, mean, invstd, rows, inner]() mutable {
      const float* g = on->grad.data();
      const float* px2 = tx.data().data();
      const float* pg2 = tg.data().data();
      if (tx.requires_grad()) {
        float* gx = tx.grad().data();
        parallel_for_rows(rows, [&](int64_t lo, int64_t hi) {
          for (int64_t r = lo; r < hi; ++r) {
            const float* xr = px2 + r * inner;
            const float* gr = g + r * inner;
            float m = (*mean)[static_cast<size_t>(r)];
            float is = (*invstd)[static_cast<size_t>(r)];
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (int64_t i = 0; i < inner; ++i) {
              double dy = static_cast<double>(gr[i]) * pg2[i];
              double xh = static_cast<double>(xr[i] - m) * is;
              sum_dy += dy;
              sum_dy_xhat += dy * xh;
            }
            double inv_n = 1.0 / static_cast<double>(inner);
            float* gxr = gx + r * inner;
            for (int64_t i = 0; i < inner; ++i) {
              double dy = static_cast<double>(gr[i]) * pg2[i];
              double xh = static_cast<double>(xr[i] - m) * is;
              gxr[i] += static_cast<float>(is * (dy - sum_dy * inv_n - xh * sum_dy_xhat * inv_n));
            }
          }
        });
      }
      bool want_g = tg.requires_grad();
      bool want_b = tb.requires_grad();
      if (want_g || want_b) {
        float* gg = want_g ? tg.grad().data() : nullptr;
        float* gb = want_b ? tb.grad().data() : nullptr;
        parallel_for_rows(inner, [&](int64_t lo, int64_t hi) {
          for (int64_t i = lo; i < hi; ++i) {
            double acc_g = 0.0, acc_b = 0.0;
            for (int64_t r = 0; r < rows; ++r) {
              float gv = g[r * inner + i];
              float xh = (px2[r * inner + i] - (*mean)[static_cast<size_t>(r)]) *
                         (*invstd)[static_cast<size_t>(r)];
              acc_g += static_cast<double>(gv) * xh;
              acc_b += static_cast<double>(gv);
            }
            if (gg) gg[i] += static_cast<float>(acc_g);
            if (gb) gb[i] += static_cast<float>(acc_b);
          }
        });
      }
    };
  }
  finalize(out);
  return out;
}

// ---------------------------------------------------------------------------
// layer_norm_channels: LayerNorm over the channel axis of (B, C, L), i.e. one
// normalization per (b, l) position, affine per channel.
// ---------------------------------------------------------------------------
Tensor layer_norm_channels(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
  WLDM_CHECK(x.ndim() == 3, "layer_norm_channels expects (B,C,L)");
  int64_t B = x.dim(0), C = x.dim(1), L = x.dim(2);
  WLDM_CHECK(gamma.numel() == C && beta.numel() == C, "layer_norm_channels affine size mismatch");

  Tensor out = make_node(x.shape(), {x, gamma, beta}, "layer_norm_channels");
  int64_t rows = B * L;
  auto mean = std::make_shared<std::vector<float>>(static_cast<size_t>(rows));
  auto invstd = std::make_shared<std::vector<float>>(static_cast<size_t>(rows));
  const float* px = x.data().data();
  const float* pg = gamma.data().data();
  const float* pbt = beta.data().data();
  float* po = out.data().data();

  parallel_for_rows(rows, [&](int64_t lo, int64_t hi) {
    for (int64_t r = lo; r < hi; ++r) {
      int64_t b = r / L;
      int64_t l = r % L;
      const float* base = px + b * C * L + l;
      double mu = 0.0;
      for (int64_t c = 0; c < C; ++c) mu += static_cast<double>(base[c * L]);
      mu /= static_cast<double>(C);
      double var = 0.0;
      for (int64_t c = 0; c < C; ++c) {
        double d = static_cast<double>(base[c * L]) - mu;
        var += d * d;
      }
      var /= static_cast<double>(C);
      float m = static_cast<float>(mu);
      float is = static_cast<float>(1.0 / std::sqrt(var + static_cast<double>(eps)));
      (*mean)[static_cast<size_t>(r)] = m;
      (*invstd)[static_cast<size_t>(r)] = is;
      float* obase = po + b * C * L + l;
      for (int64_t c = 0; c < C; ++c) {
        obase[c * L] = (base[c * L] - m) * is * pg[c] + pbt[c];
      }
    }
  });

  if (out.requires_grad()) {
    TensorNode* on = out.raw();
    Tensor tx = x, tg = gamma, tb = beta;
    out.node()->backward_fn = [on, tx, tg, tb, mean, invstd, B, C, L]() mutable {
      const float* g = on->grad.data();
      const float* px2 = tx.data().data();
      const float* pg2 = tg.data().data();
      int64_t rows = B * L;
      if (tx.requires_grad()) {
        float* gx = tx.grad().data();
        parallel_for_rows(rows, [&](int64_t lo, int64_t hi) {
          for (int64_t r = lo; r < hi; ++r) {
            int64_t b = r / L;
            int64_t l = r % L;
            const float* base = px2 + b * C * L + l;
            const float* gbase = g + b * C * L + l;
            float m = (*mean)[static_cast<size_t>(r)];
            float is = (*invstd)[static_cast<size_t>(r)];
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (int64_t c = 0; c < C; ++c) {
              double dy = static_cast<double>(gbase[c * L]) * pg2[c];
              double xh = static_cast<double>(base[c * L] - m) * is;
              sum_dy += dy;
              sum_dy_xhat += dy * xh;
            }
            double inv_n = 1.0 / static_cast<double>(C);
            float* gxbase = gx + b * C * L + l;
            for (int64_t c = 0; c < C; ++c) {
              double dy = static_cast<double>(gbase[c * L]) * pg2[c];
              double xh = static_cast<double>(base[c * L] - m) * is;
              gxbase[c * L] +=
                  static_cast<float>(is * (dy - sum_dy * inv_n - xh * sum_dy_xhat * inv_n));
            }
          }
        });
      }
      bool want_g = tg.requires_grad();
      bool want_b = tb.requires_grad();
      if (want_g || want_b) {
        float* gg = want_g ? tg.grad().data() : nullptr;
        float* gb = want_b ? tb.grad().data() : nullptr;
        parallel_for_rows(C, [&](int64_t lo, int64_t hi) {
          for (int64_t c = lo; c < hi; ++c) {
            double acc_g = 0.0, acc_b = 0.0;
            for (int64_t b = 0; b < B; ++b) {
              for (int64_t l = 0; l < L; ++l) {
                int64_t r = b * L + l;
                float gv = g[(b * C + c) * L + l];
                float xh = (px2[(b * C + c) * L + l] - (*mean)[static_cast<size_t>(r)]) *
                           (*invstd)[static_cast<size_t>(r)];
                acc_g += static_cast<double>(gv) * xh;
                acc_b += static_cast<double>(gv);
              }
            }
            if (gg) gg[c] += static_cast<float>(acc_g);
            if (gb) gb[c] += static_cast<float>(acc_b);
          }
        });
      }
    };
  }
  finalize(out);
  return out;
}

// ---------------------------------------------------------------------------
// group_norm over (B, C, spatial...): statistics per (batch, channel group).
// ---------------------------------------------------------------------------
Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  int num_groups, float eps) {
  WLDM_CHECK(x.ndim() >= 2, "group_norm expects at least (B,C)");
  int64_t B = x.dim(0), C = x.dim(1);
  WLDM_CHECK(num_groups >= 1 && C % num_groups == 0, "group_norm channels not divisible by groups");
  WLDM_CHECK(gamma.numel() == C && beta.numel() == C, "group_norm affine size mismatch");
  int64_t spatial = x.numel() / (B * C);
  int64_t cg = C / num_groups;
  int64_t group_n = cg * spatial;
  int64_t rows = B * num_groups;

  Tensor out = make_node(x.shape(), {x, gamma, beta}, "group_norm");
  auto mean = std::make_shared<std::vector<float>>(static_cast<size_t>(rows));
  auto invstd = std::make_shared<std::vector<float>>(static_cast<size_t>(rows));
  const float* px = x.data().data();
  const float* pg = gamma.data().data();
  const float* pbt = beta.data().data();
  float* po = out.data().data();

  parallel_for_rows(rows, [&](int64_t lo, int64_t hi) {
    for (int64_t r = lo; r < hi; ++r) {
      int64_t b = r / num_groups;
      int64_t gi = r % num_groups;
      const float* base = px + (b * C + gi * cg) * spatial;
      double mu = 0.0;
      for (int64_t i = 0; i < group_n; ++i) mu += static_cast<double>(base[i]);
      mu /= static_cast<double>(group_n);
      double var = 0.0;
      for (int64_t i = 0; i < group_n; ++i) {
        double d = static_cast<double>(base[i]) - mu;
        var += d * d;
      }
      var /= static_cast<double>(group_n);
      float m = static_cast<float>(mu);
      float is = static_cast<float>(1.0 / std::sqrt(var + static_cast<double>(eps)));
      (*mean)[static_cast<size_t>(r)] = m;
      (*invstd)[static_cast<size_t>(r)] = is;
      float* obase = po + (b * C + gi * cg) * spatial;
      for (int64_t cr = 0; cr < cg; ++cr) {
        float gamma_c = pg[gi * cg + cr];
        float beta_c = pbt[gi * cg + cr];
        const float* xrow = base + cr * spatial;
        float* orow = obase + cr * spatial;
        for (int64_t s = 0; s < spatial; ++s) {
          orow[s] = (xrow[s] - m) * is * gamma_c + beta_c;
        }
      }
    }
  });

  if (out.requires_grad()) {
    TensorNode* on = out.raw();
    Tensor tx = x, tg = gamma, tb = beta;
    int64_t ng = num_groups;
    out.node()->backward_fn = [on, tx, tg, tb, mean, invstd, B, C, spatial, cg, ng]() mutable {
      const float* g = on->grad.data();
      const float* px2 = tx.data().data();
      const float* pg2 = tg.data().data();
      int64_t group_n = cg * spatial;
      int64_t rows = B * ng;
      if (tx.requires_grad()) {
        float* gx = tx.grad().data();
        parallel_for_rows(rows, [&](int64_t lo, int64_t hi) {
          for (int64_t r = lo; r < hi; ++r) {
            int64_t b = r / ng;
            int64_t gi = r % ng;
            const float* base = px2 + (b * C + gi * cg) * spatial;
            const float* gbase = g + (b * C + gi * cg) * spatial;
            float m = (*mean)[static_cast<size_t>(r)];
            float is = (*invstd)[static_cast<size_t>(r)];
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (int64_t cr = 0; cr < cg; ++cr) {
              float gamma_c = pg2[gi * cg + cr];
              for (int64_t s = 0; s < spatial; ++s) {
                double dy = static_cast<double>(gbase[cr * spatial + s]) * gamma_c;
                double xh = static_cast<double>(base[cr * spatial + s] - m) * is;
                sum_dy += dy;
                sum_dy_xhat += dy * xh;
              }
            }
            double inv_n = 1.0 / static_cast<double>(group_n);
            float* gxbase = gx + (b * C + gi * cg) * spatial;
            for (int64_t cr = 0; cr < cg; ++cr) {
              float gamma_c = pg2[gi * cg + cr];
              for (int64_t s = 0; s < spatial; ++s) {
                double dy = static_cast<double>(gbase[cr * spatial + s]) * gamma_c;
                double xh = static_cast<double>(base[cr * spatial + s] - m) * is;
                gxbase[cr * spatial + s] +=
                    static_cast<float>(is * (dy - sum_dy * inv_n - xh * sum_dy_xhat * inv_n));
              }
            }
          }
        });
      }
      bool want_g = tg.requires_grad();
      bool want_b = tb.requires_grad();
      if (want_g || want_b) {
        float* gg = want_g ? tg.grad().data() : nullptr;
        float* gb = want_b ? tb.grad().data() : nullptr;
        parallel_for_rows(C, [&](int64_t lo, int64_t hi) {
          for (int64_t c = lo; c < hi; ++c) {
            int64_t gi = c / cg;
            double acc_g = 0.0, acc_b = 0.0;
            for (int64_t b = 0; b < B; ++b) {
              int64_t r = b * ng + gi;
              float m = (*mean)[static_cast<size_t>(r)];
              float is = (*invstd)[static_cast<size_t>(r)];
              const float* xrow = px2 + (b * C + c) * spatial;
              const float* grow = g + (b * C + c) * spatial;
              for (int64_t s = 0; s < spatial; ++s) {
                acc_g += static_cast<double>(grow[s]) * ((xrow[s] - m) * is);
                acc_b += static_cast<double>(grow[s]);
              }
            }
            if (gg) gg[c] += static_cast<float>(acc_g);
            if (gb) gb[c] += static_cast<float>(acc_b);
          }
        });
      }
    };
  }
  finalize(out);
  return out;
}

// ---------------------------------------------------------------------------
// Per-channel affine helpers for (B, C, ...) tensors.
// ---------------------------------------------------------------------------
Tensor scale_channels(const Tensor& x, const Tensor& s) {
  WLDM_CHECK(x.ndim() >= 2, "scale_channels expects at least (B,C)");
  int64_t B = x.dim(0), C = x.dim(1);
  WLDM_CHECK(s.numel() == C, "scale_channels size mismatch");
  int64_t spatial = x.numel() / (B * C);

  Tensor out = make_node(x.shape(), {x, s}, "scale_channels");
  const float* px = x.data().data();
  const float* ps = s.data().data();
  float* po = out.data().data();
  parallel_for(x.numel(), [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) {
      po[i] = px[i] * ps[(i / spatial) % C];
    }
  });
  if (out.requires_grad()) {
    TensorNode* on = out.raw();
    Tensor tx = x, ts = s;
    out.node()->backward_fn = [on, tx, ts, B, C, spatial]() mutable {
      const float* g = on->grad.data();
      const float* px2 = tx.data().data();
      const float* ps2 = ts.data().data();
      if (tx.requires_grad()) {
        float* gx = tx.grad().data();
        parallel_for(on->numel(), [&](int64_t lo, int64_t hi) {
          for (int64_t i = lo; i < hi; ++i) {
            gx[i] += g[i] * ps2[(i / spatial) % C];
          }
        });
      }
      if (ts.requires_grad()) {
        float* gs = ts.grad().data();
        parallel_for_rows(C, [&](int64_t lo, int64_t hi) {
          for (int64_t c = lo; c < hi; ++c) {
            double acc = 0.0;
            for (int64_t b = 0; b < B; ++b) {
              const float* grow = g + (b * C + c) * spatial;
              const float* xrow = px2 + (b * C + c) * spatial;
              for (int64_t i = 0; i < spatial; ++i) {
                acc += static_cast<double>(grow[i]) * xrow[i];
              }
            }
            gs[c] += static_cast<float>(acc);
          }
        });
      }
    };
  }
  finalize(out);
  return out;
}

Tensor add_channel_bias(const Tensor& x, const Tensor& b) {
  WLDM_CHECK(x.ndim() >= 2, "add_channel_bias expects at least (B,C)");
  int64_t B = x.dim(0), C = x.dim(1);
  WLDM_CHECK(b.numel() == C, "add_channel_bias size mismatch");
  int64_t spatial = x.numel() / (B * C);

  Tensor out = make_node(x.shape(), {x, b}, "add_channel_bias");
  const float* px = x.data().data();
  const float* pb = b.data().data();
  float* po = out.data().data();
  parallel_for(x.numel(), [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) {
      po[i] = px[i] + pb[(i / spatial) % C];
    }
  });
  if (out.requires_grad()) {
    TensorNode* on = out.raw();
    Tensor tx = x, tb = b;
    out.node()->backward_fn = [on, tx, tb, B, C, spatial]() mutable {
      const float* g = on->grad.data();
      if (tx.requires_grad()) {
        float* gx = tx.grad().data();
        parallel_for(on->numel(), [&](int64_t lo, int64_t hi) {
          for (int64_t i = lo; i < hi; ++i) gx[i] += g[i];
        });
      }
      if (tb.requires_grad()) {
        float* gb = tb.grad().data();
        parallel_for_rows(C, [&](int64_t lo, int64_t hi) {
          for (int64_t c = lo; c < hi; ++c) {
            double acc = 0.0;
            for (int64_t b2 = 0; b2 < B; ++b2) {
              const float* grow = g + (b2 * C + c) * spatial;
              for (int64_t i = 0; i < spatial; ++i) acc += static_cast<double>(grow[i]);
            }
            gb[c] += static_cast<float>(acc);
          }
        });
      }
    };
  }
  finalize(out);
  return out;
}

}  // namespace wldm::ops
