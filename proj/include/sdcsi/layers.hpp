// SPDX-License-Identifier: Apache-2.0
#pragma once

// Stateful layer primitives: batch normalisation and the LSTM recurrence.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sdcsi/ops.hpp"

namespace sdcsi {

enum class Mode { Train, Eval };

struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.9;  // weight kept on the old running value
  double eps = 1e-5;

  BatchNormState() = default;
  explicit BatchNormState(std::size_t channels) : running_mean(channels, 0.0), running_var(channels, 1.0) {}
};

/// Per-channel batch normalisation over every axis except `channel_axis`.
/// Train mode normalises with batch statistics and updates `state`; eval
/// mode uses the running statistics.
inline Tensor batchnorm(const Tensor& x, std::size_t channel_axis, const Tensor& gamma, const Tensor& beta,
                        BatchNormState& state, Mode mode) {
  if (channel_axis >= x.rank()) throw DimensionError("batchnorm: channel axis out of range");
  const auto sp = detail::split_at(x.shape(), channel_axis);
  const std::size_t C = sp.extent;
  if (gamma.numel() != C || beta.numel() != C)
    throw DimensionError("batchnorm: gamma/beta length " + std::to_string(gamma.numel()) + "/" +
                         std::to_string(beta.numel()) + " vs channel extent " + std::to_string(C));
  if (state.running_mean.size() != C || state.running_var.size() != C)
    throw DimensionError("batchnorm: running statistics sized for " + std::to_string(state.running_mean.size()) +
                         " channels, input has " + std::to_string(C));

  const std::size_t count = sp.outer * sp.inner;
  auto X = x.data();
  std::vector<double> mean(C, 0.0), invstd(C, 0.0);
  if (mode == Mode::Train) {
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t c = 0; c < C; ++c) {
        const double* p = X.data() + (o * C + c) * sp.inner;
        for (std::size_t i = 0; i < sp.inner; ++i) mean[c] += p[i];
      }
    for (auto& m : mean) m /= static_cast<double>(count);
    std::vector<double> var(C, 0.0);
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t c = 0; c < C; ++c) {
        const double* p = X.data() + (o * C + c) * sp.inner;
        for (std::size_t i = 0; i < sp.inner; ++i) var[c] += (p[i] - mean[c]) * (p[i] - mean[c]);
      }
    for (std::size_t c = 0; c < C; ++c) {
      var[c] /= static_cast<double>(count);
      invstd[c] = 1.0 / std::sqrt(var[c] + state.eps);
      const double unbiased = count > 1 ? var[c] * static_cast<double>(count) / static_cast<double>(count - 1) : var[c];
      state.running_mean[c] = state.momentum * state.running_mean[c] + (1.0 - state.momentum) * mean[c];
      state.running_var[c] = state.momentum * state.running_var[c] + (1.0 - state.momentum) * unbiased;
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = state.running_mean[c];
      invstd[c] = 1.0 / std::sqrt(state.running_var[c] + state.eps);
    }
  }

  std::vector<double> xhat(x.numel()), out(x.numel());
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t off = (o * C + c) * sp.inner;
      for (std::size_t i = 0; i < sp.inner; ++i) {
        xhat[off + i] = (X[off + i] - mean[c]) * invstd[c];
        out[off + i] = gamma[c] * xhat[off + i] + beta[c];
      }
    }

  const bool train = mode == Mode::Train;
  return detail::make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [sp, C, count, train, invstd = std::move(invstd), xhat = std::move(xhat)](detail::Node& self) {
        auto& px = *self.parents[0];
        auto& pg = *self.parents[1];
        auto& pb = *self.parents[2];
        const double* G = self.grad.data();
        std::vector<double> sum_g(C, 0.0), sum_gx(C, 0.0);
        for (std::size_t o = 0; o < sp.outer; ++o)
          for (std::size_t c = 0; c < C; ++c) {
            const std::size_t off = (o * C + c) * sp.inner;
            for (std::size_t i = 0; i < sp.inner; ++i) {
              sum_g[c] += G[off + i];
              sum_gx[c] += G[off + i] * xhat[off + i];
            }
          }
        if (pg.requires_grad) {
          auto& g = pg.grad_buffer();
          for (std::size_t c = 0; c < C; ++c) g[c] += sum_gx[c];
        }
        if (pb.requires_grad) {
          auto& g = pb.grad_buffer();
          for (std::size_t c = 0; c < C; ++c) g[c] += sum_g[c];
        }
        if (!px.requires_grad) return;
        auto& gx = px.grad_buffer();
        const double n = static_cast<double>(count);
        for (std::size_t o = 0; o < sp.outer; ++o)
          for (std::size_t c = 0; c < C; ++c) {
            const double gam = pg.data[c];
            const std::size_t off = (o * C + c) * sp.inner;
            for (std::size_t i = 0; i < sp.inner; ++i) {
              if (train) {
                // d/dx of gamma * (x - mean(x)) / std(x)
                gx[off + i] += gam * invstd[c] / n * (n * G[off + i] - sum_g[c] - xhat[off + i] * sum_gx[c]);
              } else {
                gx[off + i] += gam * invstd[c] * G[off + i];
              }
            }
          }
      });
}

/// LSTM gate parameters: weight ((input + hidden) x 4*hidden) acting on
/// [x_t, h_{t-1}], bias (4*hidden). Gate blocks are ordered input, forget,
/// candidate, output.
struct LstmWeights {
  Tensor weight;
  Tensor bias;
};

/// Runs the recurrence from a zero state and returns every hidden state.
/// Accepts (T, D) or batched (B, T, D) input.
inline Tensor lstm_forward(const Tensor& inputs, const LstmWeights& w, std::size_t hidden) {
  const bool batched = inputs.rank() == 3;
  if (inputs.rank() != 2 && !batched)
    throw DimensionError("lstm_forward: input must be (T,D) or (B,T,D), got " + shape_str(inputs.shape()));
  const Tensor x = batched ? inputs : reshape(inputs, {1, inputs.dim(0), inputs.dim(1)});
  const std::size_t B = x.dim(0), T = x.dim(1), D = x.dim(2);
  if (hidden == 0) throw DimensionError("lstm_forward: hidden size must be positive");
  if (w.weight.rank() != 2 || w.weight.dim(0) != D + hidden || w.weight.dim(1) != 4 * hidden)
    throw DimensionError("lstm_forward: weight " + shape_str(w.weight.shape()) + " expected (" +
                         std::to_string(D + hidden) + "," + std::to_string(4 * hidden) + ")");
  if (w.bias.numel() != 4 * hidden)
    throw DimensionError("lstm_forward: bias length " + std::to_string(w.bias.numel()) + " expected " +
                         std::to_string(4 * hidden));

  Tensor h = Tensor::zeros({B, hidden});
  Tensor c = Tensor::zeros({B, hidden});
  std::vector<Tensor> states;
  states.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    const Tensor gates = add_bias_last(matmul(concat_last(select(x, 1, t), h), w.weight), w.bias);
    const Tensor i = sigmoid(slice_last(gates, 0, hidden));
    const Tensor f = sigmoid(slice_last(gates, hidden, hidden));
    const Tensor g = tanh(slice_last(gates, 2 * hidden, hidden));
    const Tensor o = sigmoid(slice_last(gates, 3 * hidden, hidden));
    c = add(mul(f, c), mul(i, g));
    h = mul(o, tanh(c));
    states.push_back(h);
  }
  Tensor out = stack(states, 1);
  return batched ? out : reshape(out, {T, hidden});
}

/// Same recurrence with the gate parameters looked up as `<prefix>weight`
/// and `<prefix>bias`.
inline Tensor lstm_forward(const Tensor& inputs, const ParameterSet& params, std::size_t hidden,
                           const std::string& prefix = "") {
  return lstm_forward(inputs, LstmWeights{params.get(prefix + "weight"), params.get(prefix + "bias")}, hidden);
}

}  // namespace sdcsi
