// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include "support/check.hpp"

using namespace sdcsi;
using namespace sdcsi::testing;

namespace {

CodecConfig small_config(Variant v, std::uint64_t seed = 1) {
  CodecConfig c;
  c.T = 2;
  c.nc = 4;
  c.nt = 4;
  c.sigma = 0.25;
  c.variant = v;
  c.seed = seed;
  return c;
}

Tensor small_batch(std::mt19937_64& rng, const CodecConfig& c, std::size_t B = 3) {
  return random_tensor({B, c.T, 2, c.nc, c.nt}, rng, false, 0.3, 0.7);
}

// Weights + bias of a (filters x cin x 1 x k x k) convolution.
std::size_t conv_params(std::size_t filters, std::size_t cin, std::size_t k) { return filters * cin * k * k + filters; }

// LSTM gate weights over [input, hidden] plus bias.
std::size_t lstm_params(std::size_t input, std::size_t hidden) { return (input + hidden) * 4 * hidden + 4 * hidden; }

}  // namespace

TEST_CASE("variant names round trip") {
  for (auto v : kAllVariants) CHECK(parse_variant(to_string(v)) == v);
  CHECK_THROWS_AS(parse_variant("full+"), ConfigError);
  CHECK(uses_lstm(Variant::Full));
  CHECK(uses_sf(Variant::Full));
  CHECK_FALSE(uses_lstm(Variant::PlusSf));
  CHECK_FALSE(uses_sf(Variant::PlusLstm));
}

TEST_CASE("codeword length follows the compression ratio") {
  CodecConfig c;
  c.nc = c.nt = 8;
  c.sigma = 0.25;
  CHECK(c.codeword_length() == 32);
  c.nc = c.nt = 32;
  c.sigma = 1.0 / 8.0;
  CHECK(c.codeword_length() == 256);
  c.sigma = 1e-4;
  CHECK_THROWS_AS(c.codeword_length(), ConfigError);
}

TEST_CASE("encoder and decoder shapes") {
  std::mt19937_64 rng(1);
  for (auto v : kAllVariants) {
    const CodecConfig cfg = small_config(v);
    CodecParams p = CodecParams::initialize(cfg);
    const Tensor x = small_batch(rng, cfg);
    const Tensor c = compress(x, p, v);
    CHECK(c.shape() == Shape{3, 2, 8});
    const Tensor y = decode(c, p, Mode::Train);
    CHECK(y.shape() == x.shape());
    for (double e : y.data()) CHECK((e > 0.0 && e < 1.0));
    const Tensor single = select(x, 0, 0);
    CHECK(encode(single, p, v).shape() == Shape{2, 8});
    CHECK(forward(single, p, v).shape() == single.shape());
  }
}

TEST_CASE("decoder rejects codewords of the wrong length") {
  CodecParams p = CodecParams::initialize(small_config(Variant::Full));
  CHECK_THROWS_AS(decode(Tensor::zeros({2, 7}), p), DimensionError);
  CHECK_THROWS_AS(encode(Tensor::zeros({2, 2, 4, 5}), p, Variant::Full), DimensionError);
}

TEST_CASE("decoder parameter counts follow the layer table") {
  const CodecParams p = CodecParams::initialize(small_config(Variant::Full));
  const std::size_t expected_conv[] = {conv_params(2, 2, 7), conv_params(4, 2, 5), conv_params(8, 4, 5),
                                       conv_params(8, 8, 3), conv_params(2, 8, 1), conv_params(2, 2, 3)};
  CHECK(expected_conv[0] == 198);
  CHECK(expected_conv[1] == 204);
  CHECK(expected_conv[2] == 808);
  CHECK(expected_conv[3] == 584);
  CHECK(expected_conv[4] == 18);
  CHECK(expected_conv[5] == 38);
  const std::size_t filters[] = {2, 4, 8, 8, 2, 2};
  for (std::size_t l = 0; l < 6; ++l) {
    const std::string conv = CodecParams::conv_name(l), bn = CodecParams::bn_name(l);
    CHECK(p.params.get(conv + ".kernel").numel() + p.params.get(conv + ".bias").numel() == expected_conv[l]);
    CHECK(p.params.get(bn + ".gamma").numel() + p.params.get(bn + ".beta").numel() == 2 * filters[l]);
  }
}

TEST_CASE("encoder parameter counts at full size") {
  CodecConfig cfg;
  cfg.nc = cfg.nt = 32;
  cfg.T = 5;
  cfg.sigma = 1.0 / 8.0;
  const CodecParams p = CodecParams::initialize(cfg);
  const std::size_t F = 2048, M = 256, sf = 64 * 2 * 9 + 2 * 64 * 9;
  CHECK(parameter_count(p, Variant::Full, Side::UE) == sf + F * M + M + lstm_params(F / 2, M));
  CHECK(parameter_count(p, Variant::Baseline, Side::UE) == F * M + M);
  CHECK(parameter_count(p, Variant::Full, Side::UE) > parameter_count(p, Variant::Full, Side::BS));
  CHECK(parameter_count(p, Variant::Full, Side::Total) ==
        parameter_count(p, Variant::Full, Side::UE) + parameter_count(p, Variant::Full, Side::BS));

  cfg.sigma = 1.0 / 16.0;
  const CodecParams half = CodecParams::initialize(cfg);
  const double ratio = static_cast<double>(parameter_count(p, Variant::Full, Side::UE)) /
                       static_cast<double>(parameter_count(half, Variant::Full, Side::UE));
  CHECK(ratio >= 1.8);
  CHECK(ratio <= 2.2);
}

TEST_CASE("a silent LSTM reduces the encoder to its spatial branch") {
  std::mt19937_64 rng(2);
  const CodecConfig cfg = small_config(Variant::PlusLstm);
  CodecParams p = CodecParams::initialize(cfg);
  for (auto& w : p.params.get("enc.lstm.weight").mutable_data()) w = 0.0;
  for (auto& b : p.params.get("enc.lstm.bias").mutable_data()) b = 0.0;
  const Tensor x = small_batch(rng, cfg);
  CHECK(max_abs_diff(encode(x, p, Variant::PlusLstm).data(), encode(x, p, Variant::Baseline).data()) == 0.0);
}

TEST_CASE("only SF variants evaluate self-information") {
  std::mt19937_64 rng(3);
  const Tensor x = small_batch(rng, small_config(Variant::Full));
  for (auto v : kAllVariants) {
    CodecParams p = CodecParams::initialize(small_config(v));
    const auto before = selfinfo_call_count().load();
    forward(x, p, v);
    const auto calls = selfinfo_call_count().load() - before;
    if (uses_sf(v))
      CHECK(calls == 3 * 2);
    else
      CHECK(calls == 0);
  }
}

TEST_CASE("a precomputed mask gives the same reconstruction") {
  std::mt19937_64 rng(4);
  const CodecConfig cfg = small_config(Variant::Full);
  CodecParams p = CodecParams::initialize(cfg);
  const Tensor x = small_batch(rng, cfg);
  const Tensor mask = compute_index_mask_batch(x, p.sf);
  CHECK(max_abs_diff(forward(x, p, Variant::Full, Mode::Eval, mask).data(), forward(x, p, Variant::Full).data()) == 0.0);
}

TEST_CASE("variants sharing a seed share their initial weights") {
  const CodecParams a = CodecParams::initialize(small_config(Variant::Full, 9));
  const CodecParams b = CodecParams::initialize(small_config(Variant::Baseline, 9));
  for (const auto& [name, t] : a.params) CHECK(max_abs_diff(t.data(), b.params.get(name).data()) == 0.0);
}

TEST_CASE("gradient reaches every parameter a variant uses") {
  std::mt19937_64 rng(5);
  for (auto v : kAllVariants) {
    const CodecConfig cfg = small_config(v);
    CodecParams p = CodecParams::initialize(cfg);
    const Tensor x = small_batch(rng, cfg);
    backward(mse_loss(forward(x, p, v, Mode::Train), x));
    for (const auto& [name, t] : p.params) {
      INFO(to_string(v) << " " << name);
      if (!used_by(name, v)) {
        CHECK_FALSE(t.has_grad());
        continue;
      }
      REQUIRE(t.has_grad());
      const bool pre_bn_bias = name.find(".bias") != std::string::npos && name.rfind("dec.conv", 0) == 0;
      if (!pre_bn_bias) CHECK(std::any_of(t.grad().begin(), t.grad().end(), [](double g) { return g != 0.0; }));
    }
    CHECK_FALSE(p.sf.mapping_kernel.has_grad());
  }
}

TEST_CASE("full forward pass passes finite differences") {
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    std::mt19937_64 rng(seed);
    const CodecConfig cfg = small_config(Variant::Full, seed);
    CodecParams p = CodecParams::initialize(cfg);
    const Tensor x = small_batch(rng, cfg, 2);
    const Tensor mask = compute_index_mask_batch(x, p.sf);
    std::vector<Tensor> params;
    for (const auto& [name, t] : p.params) params.push_back(t);
    CHECK(max_grad_error([&] { return mse_loss(forward(x, p, Variant::Full, Mode::Train, mask), x); }, params, 12) <
          kGradRelTol);
  }
}

TEST_CASE("training steps never touch the mapping kernel") {
  std::mt19937_64 rng(6);
  const CodecConfig cfg = small_config(Variant::Full);
  CodecParams p = CodecParams::initialize(cfg);
  const std::vector<double> mapping(p.sf.mapping_kernel.data().begin(), p.sf.mapping_kernel.data().end());
  const std::vector<double> extract(p.sf.extract_kernel.data().begin(), p.sf.extract_kernel.data().end());
  ParameterSet trainable = trainable_parameters(p, Variant::Full);
  Adam adam;
  const Tensor x = small_batch(rng, cfg, 4);
  for (int step = 0; step < 20; ++step) {
    trainable.zero_grad();
    backward(mse_loss(forward(x, p, Variant::Full, Mode::Train), x));
    adam.step(trainable);
  }
  CHECK(max_abs_diff(p.sf.mapping_kernel.data(), mapping) == 0.0);
  CHECK(max_abs_diff(p.sf.extract_kernel.data(), extract) > 0.0);
}

TEST_CASE("clone is deep and keeps the SF aliases bound") {
  CodecParams p = CodecParams::initialize(small_config(Variant::Full));
  CodecParams q = p.clone();
  q.params.get("sf.extract").mutable_data()[0] += 1.0;
  CHECK(q.sf.extract_kernel[0] == q.params.get("sf.extract")[0]);
  CHECK(p.sf.extract_kernel[0] != q.sf.extract_kernel[0]);
  q.bn[0].running_mean[0] = 5.0;
  CHECK(p.bn[0].running_mean[0] == 0.0);
}
