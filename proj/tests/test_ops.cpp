// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include "support/check.hpp"

using namespace sdcsi;
using namespace sdcsi::testing;
using Catch::Matchers::WithinAbs;

namespace {
constexpr std::uint64_t kSeeds[] = {1, 2, 3, 5, 8};
}

TEST_CASE("activation values") {
  const Tensor x({4}, {-2.0, 0.0, 1.5, -0.1});
  const Tensor l = lrelu(x, 0.3);
  CHECK_THAT(l[0], WithinAbs(-0.6, 1e-15));
  CHECK(l[1] == 0.0);
  CHECK(l[2] == 1.5);
  CHECK_THAT(l[3], WithinAbs(-0.03, 1e-15));
  CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  const Tensor extreme = sigmoid(Tensor({2}, {-800.0, 800.0}));
  CHECK(extreme[0] >= 0.0);
  CHECK(extreme[1] == 1.0);
  CHECK(std::isfinite(extreme[0]));
}

TEST_CASE("mse of identical tensors is zero") {
  std::mt19937_64 rng(4);
  const Tensor a = random_tensor({3, 4}, rng);
  CHECK(mse_loss(a, a).item() == 0.0);
  CHECK_THAT(mse_loss(a, Tensor::zeros({3, 4})).item(),
             WithinAbs(std::inner_product(a.data().begin(), a.data().end(), a.data().begin(), 0.0) / 12.0, 1e-15));
}

TEST_CASE("elementwise and reduction gradients") {
  for (auto seed : kSeeds) {
    std::mt19937_64 rng(seed);
    Tensor a = random_tensor({3, 5}, rng, true), b = random_tensor({3, 5}, rng, true);
    CHECK(max_grad_error([&] { return probe(lrelu(a, 0.3), seed); }, {a}) < kGradRelTol);
    CHECK(max_grad_error([&] { return probe(sigmoid(a), seed); }, {a}) < kGradRelTol);
    CHECK(max_grad_error([&] { return probe(tanh(a), seed); }, {a}) < kGradRelTol);
    CHECK(max_grad_error([&] { return probe(mul(a, sub(b, a)), seed); }, {a, b}) < kGradRelTol);
    CHECK(max_grad_error([&] { return mean(scale(add(a, b), 2.5)); }, {a, b}) < kGradRelTol);
    CHECK(max_grad_error([&] { return mse_loss(a, b); }, {a, b}) < kGradRelTol);
  }
}

TEST_CASE("layout op gradients") {
  for (auto seed : kSeeds) {
    std::mt19937_64 rng(seed);
    Tensor a = random_tensor({2, 3, 4}, rng, true), b = random_tensor({2, 3, 2}, rng, true);
    CHECK(max_grad_error([&] { return probe(permute(a, {2, 0, 1}), seed); }, {a}) < kGradRelTol);
    CHECK(max_grad_error([&] { return probe(reshape(a, {6, 4}), seed); }, {a}) < kGradRelTol);
    CHECK(max_grad_error([&] { return probe(select(a, 1, 2), seed); }, {a}) < kGradRelTol);
    CHECK(max_grad_error([&] { return probe(stack({a, a, a}, 1), seed); }, {a}) < kGradRelTol);
    CHECK(max_grad_error([&] { return probe(concat_last(a, b), seed); }, {a, b}) < kGradRelTol);
    CHECK(max_grad_error([&] { return probe(slice_last(a, 1, 2), seed); }, {a}) < kGradRelTol);
  }
}

TEST_CASE("permute matches index arithmetic") {
  std::mt19937_64 rng(9);
  const Tensor a = random_tensor({2, 3, 4}, rng);
  const Tensor p = permute(a, {2, 0, 1});
  REQUIRE(p.shape() == Shape{4, 2, 3});
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t k = 0; k < 4; ++k) CHECK(p[(k * 2 + i) * 3 + j] == a[(i * 3 + j) * 4 + k]);
}

TEST_CASE("dense and pooling gradients") {
  for (auto seed : kSeeds) {
    std::mt19937_64 rng(seed);
    Tensor x = random_tensor({2, 3, 6}, rng, true), w = random_tensor({4, 6}, rng, true), b = random_tensor({4}, rng, true);
    Tensor m = random_tensor({6, 4}, rng, true);
    const Tensor bias = random_tensor({6}, rng);
    CHECK(max_grad_error([&] { return probe(conv1d_dense(x, w, b), seed); }, {x, w, b}) < kGradRelTol);
    CHECK(max_grad_error([&] { return probe(matmul(reshape(x, {6, 6}), m), seed); }, {x, m}) < kGradRelTol);
    CHECK(max_grad_error([&] { return probe(add_bias_last(x, bias), seed); }, {x}) < kGradRelTol);
    CHECK(max_grad_error([&] { return probe(maxpool_lastaxis(x, 2, 2), seed); }, {x}) < kGradRelTol);
  }
}

TEST_CASE("conv1d_dense equals a matrix product per time step") {
  std::mt19937_64 rng(21);
  const Tensor x = random_tensor({5, 2048}, rng), w = random_tensor({256, 2048}, rng), b = random_tensor({256}, rng);
  const Tensor y = conv1d_dense(x, w, b);
  REQUIRE(y.shape() == Shape{5, 256});
  double worst = 0.0;
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t o = 0; o < 256; ++o) {
      long double acc = b[o];
      for (std::size_t i = 0; i < 2048; ++i) acc += static_cast<long double>(w[o * 2048 + i]) * x[t * 2048 + i];
      worst = std::max(worst, std::abs(static_cast<double>(acc) - y[t * 256 + o]) / std::max(1.0, std::abs(y[t * 256 + o])));
    }
  CHECK(worst < 1e-12);
  CHECK_THROWS_AS(conv1d_dense(x, random_tensor({256, 2047}, rng), b), DimensionError);
}

TEST_CASE("maxpool halves the feature axis and routes gradient to the first max") {
  std::mt19937_64 rng(3);
  CHECK(maxpool_lastaxis(random_tensor({5, 2048}, rng), 2, 2).shape() == Shape{5, 1024});
  CHECK_THROWS_AS(maxpool_lastaxis(random_tensor({5, 7}, rng), 2, 2), DimensionError);

  const Tensor x({4}, {1.0, 1.0, -3.0, 2.0}, true);
  const Tensor y = maxpool_lastaxis(x, 2, 2);
  CHECK(y[0] == 1.0);
  CHECK(y[1] == 2.0);
  backward(sum(y));
  CHECK(x.grad()[0] == 1.0);
  CHECK(x.grad()[1] == 0.0);
  CHECK(x.grad()[2] == 0.0);
  CHECK(x.grad()[3] == 1.0);
}

TEST_CASE("shape errors name the operation") {
  const Tensor a = Tensor::zeros({2, 3}), b = Tensor::zeros({3, 2});
  CHECK_THROWS_AS(add(a, b), DimensionError);
  CHECK_THROWS_AS(matmul(a, a), DimensionError);
  CHECK_THROWS_AS(reshape(a, {5}), DimensionError);
  CHECK_THROWS_AS(permute(a, {0, 0}), DimensionError);
}
