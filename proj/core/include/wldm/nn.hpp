#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "wldm/ops.hpp"
#include "wldm/rng.hpp"
#include "wldm/tensor.hpp"

namespace wldm::nn {

/// Ordered, named registry of trainable tensors. Registration order is the
/// iteration order everywhere (optimizer steps, checkpoints), which is part
/// of the determinism contract.
class ParamStore {
 public:
  /// Registers t under `name`, marks it trainable, and returns it.
  Tensor add(const std::string& name, Tensor t);
  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  Tensor find(const std::string& name) const;
  int64_t scalar_count() const;
  void zero_grad();

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
  std::map<std::string, size_t> index_;
};

/// Uniform init on ±1/sqrt(fan_in), the usual conv default.
Tensor uniform_fan_in(Pcg32& rng, const Shape& shape, int64_t fan_in);

/// Optional per-call training state threaded through blocks that behave
/// differently in training (stochastic depth). All random draws go through
/// the single coordinator RNG here, in graph construction order.
struct TrainContext {
  bool training = false;
  Pcg32* rng = nullptr;
};

struct Conv1d {
  Tensor w, b;
  int stride = 1, pad = 0, dil = 1, groups = 1;
  static Conv1d make(ParamStore& ps, const std::string& prefix, Pcg32& rng,
                     int64_t cin, int64_t cout, int k, int stride = 1, int pad = 0,
                     int dil = 1, int groups = 1, bool bias = true);
  Tensor forward(const Tensor& x) const;
};

struct ConvT1d {
  Tensor w, b;
  int stride = 1, pad = 0, groups = 1;
  static ConvT1d make(ParamStore& ps, const std::string& prefix, Pcg32& rng,
                      int64_t cin, int64_t cout, int k, int stride, int pad,
                      int groups = 1, bool bias = true);
  Tensor forward(const Tensor& x) const;
};

struct Conv2d {
  Tensor w, b;
  int stride_h = 1, stride_w = 1, pad_h = 0, pad_w = 0, groups = 1;
  static Conv2d make(ParamStore& ps, const std::string& prefix, Pcg32& rng,
                     int64_t cin, int64_t cout, int kh, int kw, int stride_h = 1,
                     int stride_w = 1, int pad_h = 0, int pad_w = 0, int groups = 1,
                     bool bias = true);
  Tensor forward(const Tensor& x) const;
};

struct ConvT2d {
  Tensor w, b;
  int stride_h = 1, stride_w = 1, pad_h = 0, pad_w = 0, groups = 1;
  static ConvT2d make(ParamStore& ps, const std::string& prefix, Pcg32& rng,
                      int64_t cin, int64_t cout, int kh, int kw, int stride_h,
                      int stride_w, int pad_h = 0, int pad_w = 0, int groups = 1,
                      bool bias = true);
  Tensor forward(const Tensor& x) const;
};

/// LayerNorm over the channel axis of (B, C, L), gamma/beta per channel.
struct ChannelNorm1d {
  Tensor g, b;
  float eps = 1e-6f;
  static ChannelNorm1d make(ParamStore& ps, const std::string& prefix, int64_t c);
  Tensor forward(const Tensor& x) const;
};

/// LayerNorm over the channel axis of (B, C, H, W) per spatial position.
struct ChannelNorm2d {
  Tensor g, b;
  float eps = 1e-6f;
  static ChannelNorm2d make(ParamStore& ps, const std::string& prefix, int64_t c);
  Tensor forward(const Tensor& x) const;
};

struct GroupNorm {
  Tensor g, b;
  int groups = 8;
  float eps = 1e-5f;
  static GroupNorm make(ParamStore& ps, const std::string& prefix, int64_t c, int groups);
  Tensor forward(const Tensor& x) const;
};

/// Sets every element of a registered parameter to v (init-time helper).
void fill_param(Tensor& t, float v);

}  // namespace wldm::nn
