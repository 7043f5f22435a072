#include "park/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "park/bytesio.hpp"

namespace park {

Tensor ParamStore::add(const std::string& name, Tensor t) {
  for (const auto& [n, _] : entries_)
    if (n == name) throw std::logic_error("duplicate parameter name: " + name);
  entries_.emplace_back(name, t);
  return t;
}

Tensor ParamStore::add_uniform(const std::string& name, Shape shape,
                               double bound, Rng& rng) {
  std::vector<double> data(numel(shape));
  for (double& v : data) v = rng.uniform(-bound, bound);
  return add(name, Tensor::from(std::move(shape), std::move(data), true));
}

Tensor ParamStore::add_zeros(const std::string& name, Shape shape) {
  return add(name, Tensor::zeros(std::move(shape), true));
}

std::vector<Tensor> ParamStore::tensors() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& [_, t] : entries_) out.push_back(t);
  return out;
}

Tensor ParamStore::find(const std::string& name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return t;
  throw std::out_of_range("no such parameter: " + name);
}

int64_t ParamStore::total_params() const {
  int64_t n = 0;
  for (const auto& [_, t] : entries_) n += t.size();
  return n;
}

namespace {
constexpr uint32_t kCkptMagic = 0x54504b50;  // "PKPT"
constexpr uint32_t kCkptVersion = 1;
}  // namespace

void ParamStore::save(const std::string& path) const {
  bytesio::Writer w(path);
  w.u32(kCkptMagic);
  w.u32(kCkptVersion);
  w.u64(entries_.size());
  for (const auto& [name, t] : entries_) {
    w.str(name);
    w.u32(static_cast<uint32_t>(t.rank()));
    for (int i = 0; i < t.rank(); ++i) w.i64(t.dim(i));
    for (double v : t.value()) w.f64(v);
  }
}

void ParamStore::load(const std::string& path) {
  bytesio::Reader r(path);
  if (r.u32() != kCkptMagic)
    throw std::runtime_error("checkpoint " + path + ": bad magic");
  const uint32_t version = r.u32();
  if (version != kCkptVersion)
    throw std::runtime_error("checkpoint " + path + ": unsupported version " +
                             std::to_string(version));
  const uint64_t count = r.u64();
  if (count != entries_.size())
    throw std::runtime_error("checkpoint " + path + ": parameter count " +
                             std::to_string(count) + ", model expects " +
                             std::to_string(entries_.size()));
  for (auto& [name, t] : entries_) {
    const std::string got = r.str();
    if (got != name)
      throw std::runtime_error("checkpoint " + path + ": parameter '" + got +
                               "' where '" + name + "' expected");
    const uint32_t rank = r.u32();
    Shape shape(rank);
    for (uint32_t i = 0; i < rank; ++i) shape[i] = static_cast<int>(r.i64());
    if (shape != t.shape())
      throw std::runtime_error("checkpoint " + path + ": shape mismatch for " +
                               name);
    std::vector<double>& data = t.leaf_data();
    for (double& v : data) v = r.f64();
  }
}

Linear::Linear(ParamStore& ps, const std::string& name, int in, int out,
               Rng& rng) {
  const double bound = std::sqrt(6.0 / (in + out));
  w = ps.add_uniform(name + ".w", {in, out}, bound, rng);
  b = ps.add_zeros(name + ".b", {out});
}

Tensor Linear::operator()(const Tensor& x) const {
  if (x.rank() == 1) {
    Tensor y = matmul(reshape(x, {1, x.dim(0)}), w);
    return reshape(add_rowvec(y, b), {w.dim(1)});
  }
  return add_rowvec(matmul(x, w), b);
}

Conv2d::Conv2d(ParamStore& ps, const std::string& name, int in_c_, int out_c_,
               int k_, int stride_, int pad_, Rng& rng)
    : in_c(in_c_), out_c(out_c_), k(k_), stride(stride_), pad(pad_) {
  const int fan = in_c * k * k;
  const double bound = std::sqrt(6.0 / (fan + out_c * k * k));
  w = ps.add_uniform(name + ".w", {out_c, fan}, bound, rng);
  b = ps.add_zeros(name + ".b", {out_c});
}

Tensor Conv2d::operator()(const Tensor& x) const {
  if (x.rank() != 3 || x.dim(0) != in_c)
    throw std::invalid_argument("Conv2d: expected [" + std::to_string(in_c) +
                                ",H,W], got " + shape_str(x.shape()));
  const int oh = (x.dim(1) + 2 * pad - k) / stride + 1;
  const int ow = (x.dim(2) + 2 * pad - k) / stride + 1;
  Tensor cols = im2col(x, k, k, stride, pad);
  Tensor y = add_colvec(matmul(w, cols), b);
  return reshape(y, {out_c, oh, ow});
}

LayerNorm::LayerNorm(ParamStore& ps, const std::string& name, int d) {
  gain = ps.add_zeros(name + ".g", {d});
  for (double& v : gain.leaf_data()) v = 1.0;
  bias = ps.add_zeros(name + ".b", {d});
}

GruCell::GruCell(ParamStore& ps, const std::string& name, int input_,
                 int hidden_, Rng& rng)
    : input(input_), hidden(hidden_) {
  const double bi = std::sqrt(1.0 / input);
  const double bh = std::sqrt(1.0 / hidden);
  wz = ps.add_uniform(name + ".wz", {input, hidden}, bi, rng);
  uz = ps.add_uniform(name + ".uz", {hidden, hidden}, bh, rng);
  bz = ps.add_zeros(name + ".bz", {hidden});
  wr = ps.add_uniform(name + ".wr", {input, hidden}, bi, rng);
  ur = ps.add_uniform(name + ".ur", {hidden, hidden}, bh, rng);
  br = ps.add_zeros(name + ".br", {hidden});
  wh = ps.add_uniform(name + ".wh", {input, hidden}, bi, rng);
  uh = ps.add_uniform(name + ".uh", {hidden, hidden}, bh, rng);
  this->bh = ps.add_zeros(name + ".bh", {hidden});
}

Tensor GruCell::step(const Tensor& x, const Tensor& h) const {
  Tensor z = sigmoid(add_rowvec(add(matmul(x, wz), matmul(h, uz)), bz));
  Tensor r = sigmoid(add_rowvec(add(matmul(x, wr), matmul(h, ur)), br));
  Tensor cand = tanh(add_rowvec(add(matmul(x, wh), matmul(mul(r, h), uh)), bh));
  // h' = (1-z)*h + z*cand
  Tensor keep = mul(sub(Tensor::full(z.shape(), 1.0), z), h);
  return add(keep, mul(z, cand));
}

MultiheadAttention::MultiheadAttention(ParamStore& ps, const std::string& name,
                                       int d, int heads_, Rng& rng)
    : heads(heads_) {
  wq = Linear(ps, name + ".q", d, d, rng);
  wk = Linear(ps, name + ".k", d, d, rng);
  wv = Linear(ps, name + ".v", d, d, rng);
  wo = Linear(ps, name + ".o", d, d, rng);
}

Tensor MultiheadAttention::operator()(const Tensor& q_in, const Tensor& kv_in,
                                      const Tensor& mask) const {
  return wo(attention(wq(q_in), wk(kv_in), wv(kv_in), heads, mask));
}

EncoderLayer::EncoderLayer(ParamStore& ps, const std::string& name, int d,
                           int heads, int ff, Rng& rng) {
  ln1 = LayerNorm(ps, name + ".ln1", d);
  ln2 = LayerNorm(ps, name + ".ln2", d);
  attn = MultiheadAttention(ps, name + ".attn", d, heads, rng);
  ff1 = Linear(ps, name + ".ff1", d, ff, rng);
  ff2 = Linear(ps, name + ".ff2", ff, d, rng);
}

Tensor EncoderLayer::operator()(const Tensor& x) const {
  Tensor h = ln1(x);
  Tensor y = add(x, attn(h, h));
  Tensor h2 = ln2(y);
  return add(y, ff2(relu(ff1(h2))));
}

DecoderLayer::DecoderLayer(ParamStore& ps, const std::string& name, int d,
                           int heads, int ff, Rng& rng) {
  ln1 = LayerNorm(ps, name + ".ln1", d);
  ln2 = LayerNorm(ps, name + ".ln2", d);
  ln3 = LayerNorm(ps, name + ".ln3", d);
  self_attn = MultiheadAttention(ps, name + ".self", d, heads, rng);
  cross_attn = MultiheadAttention(ps, name + ".cross", d, heads, rng);
  ff1 = Linear(ps, name + ".ff1", d, ff, rng);
  ff2 = Linear(ps, name + ".ff2", ff, d, rng);
}

Tensor DecoderLayer::operator()(const Tensor& x, const Tensor& memory,
                                const Tensor& causal) const {
  Tensor h = ln1(x);
  Tensor y = add(x, self_attn(h, h, causal));
  Tensor h2 = ln2(y);
  Tensor z = add(y, cross_attn(h2, memory));
  Tensor h3 = ln3(z);
  return add(z, ff2(relu(ff1(h3))));
}

Tensor causal_mask(int t) {
  std::vector<double> m(static_cast<size_t>(t) * t, 0.0);
  for (int i = 0; i < t; ++i)
    for (int j = i + 1; j < t; ++j) m[static_cast<size_t>(i) * t + j] = kMaskedLogit;
  return Tensor::from({t, t}, std::move(m));
}

std::vector<double> sinusoid_position(int pos, int d) {
  std::vector<double> row(d);
  for (int i = 0; i < d / 2; ++i) {
    const double freq = std::pow(10000.0, -2.0 * i / d);
    row[2 * i] = std::sin(pos * freq);
    row[2 * i + 1] = std::cos(pos * freq);
  }
  if (d % 2) row[d - 1] = std::sin(pos * std::pow(10000.0, -(d - 1.0) / d));
  return row;
}

Tensor sinusoid_table(int n, int d) {
  std::vector<double> data;
  data.reserve(static_cast<size_t>(n) * d);
  for (int p = 0; p < n; ++p) {
    const std::vector<double> row = sinusoid_position(p, d);
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor::from({n, d}, std::move(data));
}

void Adam::step(ParamStore& params, const GradMap& grads) {
  const auto& entries = params.entries();
  if (m_.empty()) {
    m_.resize(entries.size());
    v_.resize(entries.size());
    for (size_t i = 0; i < entries.size(); ++i) {
      m_[i].assign(entries[i].second.size(), 0.0);
      v_[i].assign(entries[i].second.size(), 0.0);
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < entries.size(); ++i) {
    Tensor t = entries[i].second;
    const std::vector<double>* g = grads.find(t);
    if (!g) continue;
    std::vector<double>& data = t.leaf_data();
    for (size_t j = 0; j < data.size(); ++j) {
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * (*g)[j];
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * (*g)[j] * (*g)[j];
      const double mhat = m_[i][j] / bc1;
      const double vhat = v_[i][j] / bc2;
      data[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace park
