// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include "support/check.hpp"

using namespace sdcsi;
using Catch::Matchers::WithinAbs;

TEST_CASE("tensor rejects zero extents and length mismatch") {
  CHECK_THROWS_AS(Tensor({2, 0}, {}), DimensionError);
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
  CHECK_NOTHROW(Tensor({2, 2}, {1.0, 2.0, 3.0, 4.0}));
}

TEST_CASE("backward requires a scalar that tracks gradients") {
  const Tensor x({2}, {1.0, 2.0}, true);
  CHECK_THROWS_AS(backward(x), UsageError);
  CHECK_THROWS_AS(backward(Tensor::scalar(1.0)), UsageError);
}

TEST_CASE("gradients accumulate over every use of a leaf") {
  const Tensor x({3}, {1.0, -2.0, 0.5}, true);
  backward(sum(add(mul(x, x), x)));  // d/dx (x^2 + x) = 2x + 1
  for (std::size_t i = 0; i < 3; ++i) CHECK_THAT(x.grad()[i], WithinAbs(2.0 * x[i] + 1.0, 1e-15));
}

TEST_CASE("diamond graph visits the shared node once") {
  const Tensor x = Tensor::scalar(3.0, true);
  const Tensor y = mul(x, x);
  backward(add(y, y));  // 2 x^2 -> 4x
  CHECK_THAT(x.grad()[0], WithinAbs(12.0, 1e-15));
}

TEST_CASE("no-grad guard produces graph-free results") {
  const Tensor x({2}, {1.0, 2.0}, true);
  Tensor y;
  {
    NoGradGuard guard;
    y = mul(x, x);
  }
  CHECK_FALSE(y.requires_grad());
  CHECK(mul(x, x).requires_grad());
}

TEST_CASE("parameter set keeps order and rejects duplicates") {
  ParameterSet ps;
  ps.add("b", Tensor::zeros({2}));
  ps.add("a", Tensor::zeros({3}));
  CHECK_THROWS_AS(ps.add("a", Tensor::zeros({1})), UsageError);
  CHECK(ps.begin()->first == "b");
  CHECK(ps.total_elements() == 5);
  CHECK(ps.get("a").requires_grad());

  const ParameterSet copy = ps.clone();
  ps.get("a").mutable_data()[0] = 7.0;
  CHECK(copy.get("a")[0] == 0.0);
}

TEST_CASE("detach and clone copy values without the graph") {
  const Tensor x({2}, {1.0, 2.0}, true);
  const Tensor y = mul(x, x);
  CHECK_FALSE(y.detach().requires_grad());
  CHECK(x.clone().requires_grad());
  CHECK(y.detach()[1] == 4.0);
}
