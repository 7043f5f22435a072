#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstdio>

#include "park/gradcheck.hpp"
#include "park/nn.hpp"
#include "park/rng.hpp"

using namespace park;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool rg = false) {
  std::vector<double> data(numel(shape));
  for (double& v : data) v = rng.normal();
  return Tensor::from(std::move(shape), std::move(data), rg);
}

}  // namespace

TEST_CASE("attention over a single key returns that value row") {
  Rng rng(1);
  Tensor q = random_tensor({1, 8}, rng);
  Tensor k = random_tensor({1, 8}, rng);
  Tensor v = random_tensor({1, 8}, rng);
  Tensor out = attention(q, k, v, 4);
  for (int i = 0; i < 8; ++i)
    CHECK(out.value()[i] == doctest::Approx(v.value()[i]).epsilon(1e-14));
}

TEST_CASE("attention weights are normalized per query row") {
  Rng rng(2);
  Tensor q = random_tensor({3, 8}, rng);
  Tensor k = random_tensor({5, 8}, rng);
  auto w = attention_weights(q, k, 2);
  for (int i = 0; i < 3; ++i) {
    double s = 0.0;
    for (int j = 0; j < 5; ++j) s += w[i * 5 + j];
    CHECK(std::fabs(s - 1.0) < 1e-9);
  }
}

TEST_CASE("masked keys receive exactly zero weight and zero influence") {
  Rng rng(3);
  Tensor q = random_tensor({1, 8}, rng);
  Tensor k = random_tensor({4, 8}, rng);
  Tensor v1 = random_tensor({4, 8}, rng);
  std::vector<double> m(4, 0.0);
  m[2] = kMaskedLogit;
  Tensor mask = Tensor::from({1, 4}, std::move(m));

  Tensor out1 = attention(q, k, v1, 2, mask);
  // zero out the masked slot's values: bit-identical output required
  std::vector<double> v2d = v1.value();
  for (int c = 0; c < 8; ++c) v2d[2 * 8 + c] = 0.0;
  Tensor v2 = Tensor::from({4, 8}, std::move(v2d));
  Tensor out2 = attention(q, k, v2, 2, mask);
  CHECK(out1.value() == out2.value());

  auto w = attention_weights(q, k, 2, mask);
  CHECK(w[2] == 0.0);
}

TEST_CASE("causal self-attention outputs do not depend on later rows") {
  Rng rng(4);
  Tensor x5 = random_tensor({5, 8}, rng);
  std::vector<double> head3(x5.value().begin(), x5.value().begin() + 3 * 8);
  Tensor x3 = Tensor::from({3, 8}, std::move(head3));
  Tensor y5 = attention(x5, x5, x5, 2, causal_mask(5));
  Tensor y3 = attention(x3, x3, x3, 2, causal_mask(3));
  for (int i = 0; i < 3 * 8; ++i) CHECK(y5.value()[i] == y3.value()[i]);
}

TEST_CASE("multi-head attention block passes gradient check") {
  Rng rng(5);
  ParamStore ps;
  MultiheadAttention mha(ps, "mha", 8, 2, rng);
  Tensor x = random_tensor({4, 8}, rng);
  Tensor mem = random_tensor({6, 8}, rng);
  auto f = [&] { return mean_all(square(mha(x, mem))); };
  auto params = ps.tensors();
  CHECK(finite_diff_check(f, params) < 1e-4);
}

TEST_CASE("attention gradient check with causal mask") {
  Rng rng(6);
  Tensor q = random_tensor({4, 8}, rng, true);
  Tensor k = random_tensor({4, 8}, rng, true);
  Tensor v = random_tensor({4, 8}, rng, true);
  Tensor mask = causal_mask(4);
  std::vector<Tensor> params = {q, k, v};
  auto f = [&] { return mean_all(square(attention(q, k, v, 4, mask))); };
  CHECK(finite_diff_check(f, params) < 1e-4);
}

TEST_CASE("conv2d with a centered delta kernel is the identity") {
  Rng rng(7);
  ParamStore ps;
  Conv2d conv(ps, "c", 1, 1, 3, 1, 1, rng);
  std::vector<double>& w = conv.w.leaf_data();
  for (double& v : w) v = 0.0;
  w[4] = 1.0;
  Tensor x = random_tensor({1, 5, 5}, rng);
  Tensor y = conv(x);
  for (int i = 0; i < 25; ++i)
    CHECK(y.value()[i] == doctest::Approx(x.value()[i]));
}

TEST_CASE("conv2d strided passes gradient check") {
  Rng rng(8);
  ParamStore ps;
  Conv2d conv(ps, "c", 2, 3, 3, 2, 1, rng);
  Tensor x = random_tensor({2, 6, 6}, rng);
  auto f = [&] { return mean_all(square(conv(x))); };
  auto params = ps.tensors();
  CHECK(finite_diff_check(f, params) < 1e-4);
}

TEST_CASE("gru cell passes gradient check over all gate weights") {
  Rng rng(9);
  ParamStore ps;
  GruCell gru(ps, "gru", 3, 5, rng);
  Tensor x0 = random_tensor({2, 3}, rng);
  Tensor x1 = random_tensor({2, 3}, rng);
  auto f = [&] {
    Tensor h = Tensor::zeros({2, 5});
    h = gru.step(x0, h);
    h = gru.step(x1, h);
    return mean_all(square(h));
  };
  auto params = ps.tensors();
  CHECK(finite_diff_check(f, params) < 1e-4);
}

TEST_CASE("layer norm output rows have zero mean and unit variance") {
  Rng rng(10);
  ParamStore ps;
  LayerNorm ln(ps, "ln", 16);
  Tensor x = random_tensor({3, 16}, rng);
  Tensor y = ln(x);
  for (int i = 0; i < 3; ++i) {
    double mean = 0.0, var = 0.0;
    for (int j = 0; j < 16; ++j) mean += y.value()[i * 16 + j];
    mean /= 16;
    for (int j = 0; j < 16; ++j) {
      const double d = y.value()[i * 16 + j] - mean;
      var += d * d;
    }
    var /= 16;
    CHECK(std::fabs(mean) < 1e-12);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("encoder and decoder layers pass gradient checks") {
  Rng rng(11);
  ParamStore ps;
  EncoderLayer enc(ps, "enc", 8, 2, 16, rng);
  DecoderLayer dec(ps, "dec", 8, 2, 16, rng);
  Tensor x = random_tensor({3, 8}, rng);
  Tensor tok = random_tensor({4, 8}, rng);
  Tensor mask = causal_mask(4);
  auto f = [&] {
    Tensor mem = enc(x);
    Tensor y = dec(tok, mem, mask);
    return mean_all(square(y));
  };
  auto params = ps.tensors();
  FiniteDiffOptions opt;
  opt.sample_threshold = 500;
  opt.max_coords = 40;
  CHECK(finite_diff_check(f, params, opt) < 1e-4);
}

TEST_CASE("sinusoid encodings are bounded and start at sin0/cos1") {
  auto row0 = sinusoid_position(0, 16);
  for (int i = 0; i < 8; ++i) {
    CHECK(row0[2 * i] == 0.0);
    CHECK(row0[2 * i + 1] == 1.0);
  }
  for (int p : {1, 17, 393}) {
    auto row = sinusoid_position(p, 16);
    for (double v : row) CHECK(std::fabs(v) <= 1.0);
  }
}

TEST_CASE("adam step reduces a quadratic objective") {
  Rng rng(12);
  ParamStore ps;
  Tensor x = ps.add_uniform("x", {8}, 1.0, rng);
  Adam opt(0.05);
  auto loss_of = [&] { return sum_all(square(x)); };
  const double before = loss_of().item();
  for (int i = 0; i < 20; ++i) {
    Tensor loss = loss_of();
    GradMap grads;
    backward(loss, &grads);
    opt.step(ps, grads);
  }
  CHECK(loss_of().item() < before);
}

TEST_CASE("checkpoint save and reload is bit-exact") {
  Rng rng(13);
  ParamStore ps;
  Linear l1(ps, "layer1", 4, 6, rng);
  GruCell g(ps, "gru", 3, 4, rng);
  const std::string path = "/tmp/park_test_ckpt.bin";
  ps.save(path);

  Rng rng2(999);
  ParamStore ps2;
  Linear l1b(ps2, "layer1", 4, 6, rng2);
  GruCell gb(ps2, "gru", 3, 4, rng2);
  ps2.load(path);
  for (size_t i = 0; i < ps.entries().size(); ++i)
    CHECK(ps.entries()[i].second.value() == ps2.entries()[i].second.value());
  std::remove(path.c_str());
}

TEST_CASE("checkpoint loader rejects corrupted magic and truncation") {
  Rng rng(14);
  ParamStore ps;
  Linear l(ps, "l", 3, 3, rng);
  const std::string path = "/tmp/park_test_ckpt2.bin";
  ps.save(path);

  {
    FILE* fp = std::fopen(path.c_str(), "r+b");
    std::fputc('X', fp);
    std::fclose(fp);
    CHECK_THROWS(ps.load(path));
  }
  ps.save(path);
  {
    FILE* fp = std::fopen(path.c_str(), "r+b");
    std::fseek(fp, 0, SEEK_END);
    const long sz = std::ftell(fp);
    std::fclose(fp);
    REQUIRE(truncate(path.c_str(), sz - 9) == 0);
    CHECK_THROWS(ps.load(path));
  }
  std::remove(path.c_str());
}
