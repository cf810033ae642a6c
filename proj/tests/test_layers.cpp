// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include "support/check.hpp"

using namespace sdcsi;
using namespace sdcsi::testing;
using Catch::Matchers::WithinAbs;

namespace {
double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

TEST_CASE("batch norm in train mode standardises each channel") {
  std::mt19937_64 rng(7);
  const Tensor x = random_tensor({4, 3, 2, 5, 5}, rng, false, -10.0, 10.0);
  BatchNormState st(3);
  const Tensor y = batchnorm(x, 1, Tensor::full({3}, 1.0), Tensor::zeros({3}), st, Mode::Train);
  const std::size_t inner = 2 * 5 * 5;
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0.0, s2 = 0.0;
    std::size_t n = 0;
    for (std::size_t b = 0; b < 4; ++b)
      for (std::size_t i = 0; i < inner; ++i, ++n) {
        const double v = y[(b * 3 + c) * inner + i];
        s += v;
        s2 += v * v;
      }
    const double mean = s / static_cast<double>(n);
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(s2 / static_cast<double>(n) - mean * mean - 1.0) < 1e-6);
  }
}

TEST_CASE("batch norm running statistics") {
  const Tensor x({4, 1}, {1.0, 2.0, 3.0, 4.0});
  BatchNormState st(1);
  batchnorm(x, 1, Tensor::full({1}, 1.0), Tensor::zeros({1}), st, Mode::Train);
  // momentum 0.9 keeps 90 % of the old value; the variance update is unbiased.
  CHECK_THAT(st.running_mean[0], WithinAbs(0.1 * 2.5, 1e-15));
  CHECK_THAT(st.running_var[0], WithinAbs(0.9 + 0.1 * (5.0 / 3.0), 1e-15));

  const Tensor y = batchnorm(x, 1, Tensor::full({1}, 2.0), Tensor::full({1}, 0.5), st, Mode::Eval);
  CHECK_THAT(y[3], WithinAbs(2.0 * (4.0 - st.running_mean[0]) / std::sqrt(st.running_var[0] + st.eps) + 0.5, 1e-12));
  CHECK_THAT(st.running_mean[0], WithinAbs(0.25, 1e-15));  // eval leaves state untouched
}

TEST_CASE("batch norm gradients in both modes") {
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    std::mt19937_64 rng(seed);
    Tensor x = random_tensor({3, 2, 4, 3}, rng, true), g = random_tensor({2}, rng, true, 0.5, 1.5),
           b = random_tensor({2}, rng, true);
    CHECK(max_grad_error(
              [&] {
                BatchNormState st(2);
                return probe(batchnorm(x, 1, g, b, st, Mode::Train), seed);
              },
              {x, g, b}) < kGradRelTol);
    BatchNormState fixed(2);
    fixed.running_mean = {0.3, -0.2};
    fixed.running_var = {0.7, 1.4};
    CHECK(max_grad_error([&] { return probe(batchnorm(x, 1, g, b, fixed, Mode::Eval), seed); }, {x, g, b}) < kGradRelTol);
  }
}

TEST_CASE("scalar LSTM against a hand-evaluated recurrence") {
  // D = H = 1; weight rows are [x, h], columns the gates i, f, g, o.
  const std::vector<double> w{0.5, -0.3, 0.8, 0.2,   // from x
                              0.1, 0.4, -0.6, 0.7};  // from h
  const std::vector<double> bias{0.05, 0.1, -0.2, 0.0};
  const std::vector<double> xs{0.9, -0.4, 0.3};
  const LstmWeights lw{Tensor({2, 4}, w), Tensor({4}, bias)};
  const Tensor hs = lstm_forward(Tensor({3, 1}, xs), lw, 1);
  REQUIRE(hs.shape() == Shape{3, 1});

  double h = 0.0, c = 0.0;
  for (std::size_t t = 0; t < 3; ++t) {
    auto z = [&](std::size_t gate) { return w[gate] * xs[t] + w[4 + gate] * h + bias[gate]; };
    const double i = logistic(z(0)), f = logistic(z(1)), g = std::tanh(z(2)), o = logistic(z(3));
    c = f * c + i * g;
    h = o * std::tanh(c);
    CHECK_THAT(hs[t], WithinAbs(h, 1e-14));
  }
}

TEST_CASE("LSTM gradients and batch consistency") {
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    std::mt19937_64 rng(seed);
    Tensor x = random_tensor({2, 3, 4}, rng, true), w = random_tensor({4 + 3, 12}, rng, true),
           b = random_tensor({12}, rng, true);
    CHECK(max_grad_error([&] { return probe(lstm_forward(x, LstmWeights{w, b}, 3), seed); }, {x, w, b}) < kGradRelTol);
  }
  std::mt19937_64 rng(9);
  const Tensor x = random_tensor({2, 3, 4}, rng);
  const LstmWeights lw{random_tensor({7, 12}, rng), random_tensor({12}, rng)};
  const Tensor batched = lstm_forward(x, lw, 3);
  const Tensor single = lstm_forward(select(x, 0, 1), lw, 3);
  CHECK(max_abs_diff(select(batched, 0, 1).data(), single.data()) < 1e-15);
}

TEST_CASE("LSTM over pooled full-size frames") {
  std::mt19937_64 rng(2);
  const Tensor x = random_tensor({5, 1024}, rng);
  const LstmWeights lw{fan_in_uniform({2048, 4096}, 2048, rng, false), Tensor::zeros({4096})};
  const Tensor hs = lstm_forward(x, lw, 1024);
  CHECK(hs.shape() == Shape{5, 1024});
  CHECK_THROWS_AS(lstm_forward(x, lw, 512), DimensionError);
}

TEST_CASE("Adam leaves parameters without gradient signal unchanged") {
  ParameterSet ps;
  ps.add("w", Tensor({3}, {1.0, -2.0, 3.0}));
  Adam adam;
  adam.step(ps);  // no gradient at all
  CHECK(ps.get("w")[1] == -2.0);

  backward(scale(sum(ps.get("w")), 0.0));  // all-zero gradient
  adam.step(ps);
  CHECK(ps.get("w")[0] == 1.0);
  CHECK(ps.get("w")[2] == 3.0);
}

TEST_CASE("Adam first step moves by the learning rate against the gradient") {
  ParameterSet ps;
  ps.add("w", Tensor({2}, {1.0, 1.0}));
  backward(sum(mul(ps.get("w"), Tensor({2}, {3.0, -0.5}))));
  Adam adam(AdamOptions{0.01});
  adam.step(ps);
  CHECK_THAT(ps.get("w")[0], WithinAbs(0.99, 1e-9));
  CHECK_THAT(ps.get("w")[1], WithinAbs(1.01, 1e-9));
}
