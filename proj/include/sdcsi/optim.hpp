// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "sdcsi/tensor.hpp"

namespace sdcsi {

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) draw for a weight of `shape`.
inline Tensor fan_in_uniform(const Shape& shape, std::size_t fan_in, std::mt19937_64& rng,
                             bool requires_grad = true) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(numel_of(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(shape, std::move(v), requires_grad);
}

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias-corrected moments, keyed by parameter name.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : opt_(options) {}

  const AdamOptions& options() const { return opt_; }
  std::uint64_t steps() const { return step_; }

  /// Updates every parameter that currently holds a gradient.
  void step(ParameterSet& params) {
    ++step_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(step_));
    for (auto& [name, p] : params) {
      if (!p.has_grad()) continue;
      auto& st = state_[name];
      if (st.m.empty()) {
        st.m.assign(p.numel(), 0.0);
        st.v.assign(p.numel(), 0.0);
      }
      auto g = p.grad();
      auto w = p.mutable_data();
      for (std::size_t i = 0; i < w.size(); ++i) {
        st.m[i] = opt_.beta1 * st.m[i] + (1.0 - opt_.beta1) * g[i];
        st.v[i] = opt_.beta2 * st.v[i] + (1.0 - opt_.beta2) * g[i] * g[i];
        const double mhat = st.m[i] / bc1;
        const double vhat = st.v[i] / bc2;
        w[i] -= opt_.lr * mhat / (std::sqrt(vhat) + opt_.eps);
      }
    }
  }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  AdamOptions opt_;
  std::uint64_t step_ = 0;
  std::unordered_map<std::string, Moments> state_;
};

}  // namespace sdcsi
