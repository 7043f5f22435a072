#pragma once

#include <string>
#include <vector>

#include "park/rng.hpp"
#include "park/tensor.hpp"

namespace park {

// Ordered, named registry of trainable leaf tensors. Serves the optimizer,
// the gradient checker, and the binary checkpoint container.
class ParamStore {
 public:
  Tensor add_uniform(const std::string& name, Shape shape, double bound,
                     Rng& rng);
  Tensor add_zeros(const std::string& name, Shape shape);

  const std::vector<std::pair<std::string, Tensor>>& entries() const {
    return entries_;
  }
  std::vector<Tensor> tensors() const;
  Tensor find(const std::string& name) const;
  int64_t total_params() const;

  // Checkpoint container: magic, version, parameter count, then per
  // parameter its name, shape, and 64-bit little-endian values.
  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  Tensor add(const std::string& name, Tensor t);
  std::vector<std::pair<std::string, Tensor>> entries_;
};

struct Linear {
  Tensor w;  // [in, out]
  Tensor b;  // [out]

  Linear() = default;
  Linear(ParamStore& ps, const std::string& name, int in, int out, Rng& rng);

  // x: [N,in] -> [N,out], or [in] -> [out]
  Tensor operator()(const Tensor& x) const;
};

struct Conv2d {
  Tensor w;  // [out_c, in_c*k*k]
  Tensor b;  // [out_c]
  int in_c = 0, out_c = 0, k = 0, stride = 1, pad = 0;

  Conv2d() = default;
  Conv2d(ParamStore& ps, const std::string& name, int in_c, int out_c, int k,
         int stride, int pad, Rng& rng);

  // x: [in_c,H,W] -> [out_c,OH,OW]
  Tensor operator()(const Tensor& x) const;
};

struct LayerNorm {
  Tensor gain, bias;

  LayerNorm() = default;
  LayerNorm(ParamStore& ps, const std::string& name, int d);

  Tensor operator()(const Tensor& x) const { return layer_norm(x, gain, bias); }
};

// Single gated-recurrent cell; weights shared across whatever batch rows are
// passed in. x: [B,in], h: [B,hid].
struct GruCell {
  Tensor wz, uz, bz;
  Tensor wr, ur, br;
  Tensor wh, uh, bh;
  int input = 0, hidden = 0;

  GruCell() = default;
  GruCell(ParamStore& ps, const std::string& name, int input, int hidden,
          Rng& rng);

  Tensor step(const Tensor& x, const Tensor& h) const;
};

struct MultiheadAttention {
  Linear wq, wk, wv, wo;
  int heads = 0;

  MultiheadAttention() = default;
  MultiheadAttention(ParamStore& ps, const std::string& name, int d, int heads,
                     Rng& rng);

  Tensor operator()(const Tensor& q_in, const Tensor& kv_in,
                    const Tensor& mask = Tensor()) const;
};

// Pre-layer-normalization Transformer encoder layer.
struct EncoderLayer {
  LayerNorm ln1, ln2;
  MultiheadAttention attn;
  Linear ff1, ff2;

  EncoderLayer() = default;
  EncoderLayer(ParamStore& ps, const std::string& name, int d, int heads,
               int ff, Rng& rng);

  Tensor operator()(const Tensor& x) const;
};

// Pre-layer-normalization decoder layer: causal self-attention, then
// cross-attention into encoder memory, then the feed-forward block.
struct DecoderLayer {
  LayerNorm ln1, ln2, ln3;
  MultiheadAttention self_attn, cross_attn;
  Linear ff1, ff2;

  DecoderLayer() = default;
  DecoderLayer(ParamStore& ps, const std::string& name, int d, int heads,
               int ff, Rng& rng);

  Tensor operator()(const Tensor& x, const Tensor& memory,
                    const Tensor& causal_mask) const;
};

// Additive mask value used to exclude key positions from attention; large
// enough that exp() underflows to exactly zero after max subtraction.
constexpr double kMaskedLogit = -1e30;

Tensor causal_mask(int t);

// Standard sinusoidal encoding: row p has sin(p*w_i) in even channels and
// cos(p*w_i) in odd ones, with the usual 10000^(-2i/d) frequency ladder.
std::vector<double> sinusoid_position(int pos, int d);
Tensor sinusoid_table(int n, int d);

// First-/second-moment adaptive step sizing over a ParamStore.
class Adam {
 public:
  explicit Adam(double lr = 3e-4, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamStore& params, const GradMap& grads);

 private:
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace park
