// SPDX-License-Identifier: Apache-2.0
#pragma once

// Self-information transform of a CSI sequence.
//
// Each pixel's self-information is estimated from its 3x3 neighbourhood
// (centre included) under a unit-variance Gaussian kernel:
//
//   I_j = -log2( (1/9) * sum_r exp(-(p_j - p'_{j,r})^2 / 2) / sqrt(2 pi) )
//
// A fixed random 2D convolution maps the (2, N_c, N_t) self-information
// matrix of every frame to 64 feature planes; thresholding those planes
// yields a binary index mask that gates the trainable 64-channel feature
// extraction before the restoration convolution.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "sdcsi/conv.hpp"
#include "sdcsi/optim.hpp"

namespace sdcsi {

inline constexpr std::size_t kSfFeatures = 64;

/// 0.5 * log2(2 pi): the value on a constant patch and the lower bound.
inline const double kSelfInfoFloor = 0.5 * std::log2(2.0 * std::numbers::pi);

/// Counts selfinfo_matrix invocations (instrumentation for variant tests).
inline std::atomic<std::uint64_t>& selfinfo_call_count() {
  static std::atomic<std::uint64_t> count{0};
  return count;
}

/// `patch` is the row-major 3x3 neighbourhood; element 4 is the centre.
inline double self_information_pixel(std::span<const double, 9> patch) {
  const double centre = patch[4];
  double s = 0.0;
  for (double p : patch) {
    const double d = centre - p;
    s += std::exp(-0.5 * d * d);
  }
  const double prob = s / (9.0 * std::sqrt(2.0 * std::numbers::pi));
  return -std::log2(prob);
}

/// Per-channel self-information of one frame (2, N_c, N_t), replicate
/// padding at the borders.
inline Tensor selfinfo_matrix(const Tensor& frame) {
  if (frame.rank() != 3) throw DimensionError("selfinfo_matrix: expected (C,N_c,N_t), got " + shape_str(frame.shape()));
  selfinfo_call_count().fetch_add(1, std::memory_order_relaxed);
  const std::size_t C = frame.dim(0), H = frame.dim(1), W = frame.dim(2);
  auto X = frame.data();
  std::vector<double> out(frame.numel());
  std::array<double, 9> patch{};
  auto clamp = [](long v, std::size_t n) { return static_cast<std::size_t>(std::clamp<long>(v, 0, static_cast<long>(n) - 1)); };
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j) {
        std::size_t k = 0;
        for (long di = -1; di <= 1; ++di)
          for (long dj = -1; dj <= 1; ++dj)
            patch[k++] = X[(c * H + clamp(static_cast<long>(i) + di, H)) * W + clamp(static_cast<long>(j) + dj, W)];
        out[(c * H + i) * W + j] = self_information_pixel(patch);
      }
  return Tensor(frame.shape(), std::move(out));
}

/// Trainable extraction/restoration kernels plus the fixed mapping kernel.
struct SfParams {
  Tensor extract_kernel;  // (64, 2, 1, 3, 3)
  Tensor restore_kernel;  // (2, 64, 1, 3, 3)
  Tensor mapping_kernel;  // (64, 2, 3, 3), never trained
  double quantile = 0.5;

  static SfParams initialize(std::mt19937_64& rng, double quantile = 0.5) {
    if (!(quantile > 0.0 && quantile < 1.0)) throw ConfigError("sf.quantile must lie in (0, 1)");
    SfParams p;
    p.extract_kernel = fan_in_uniform({kSfFeatures, 2, 1, 3, 3}, 2 * 9, rng);
    p.restore_kernel = fan_in_uniform({2, kSfFeatures, 1, 3, 3}, kSfFeatures * 9, rng);
    p.mapping_kernel = fan_in_uniform({kSfFeatures, 2, 3, 3}, 2 * 9, rng, /*requires_grad=*/false);
    p.quantile = quantile;
    return p;
  }
};

/// D_i = conv2d(I_i, mapping kernel), padding 1. (2,N_c,N_t) -> (64,N_c,N_t).
inline Tensor mapping_layer(const Tensor& selfinfo, const Tensor& mapping_kernel) {
  if (selfinfo.rank() != 3) throw DimensionError("mapping_layer: expected (2,N_c,N_t), got " + shape_str(selfinfo.shape()));
  NoGradGuard no_grad;
  const auto& s = selfinfo.shape();
  const Tensor out = conv2d(reshape(selfinfo, {1, s[0], s[1], s[2]}), mapping_kernel.detach(), {1, 1}, {1, 1});
  return Tensor({out.dim(1), out.dim(2), out.dim(3)}, std::vector<double>(out.data().begin(), out.data().end()));
}

/// Binary mask over D (C, N_c, N_t). Each channel keeps entries at or above
/// its q-quantile: the threshold is the floor(q*n)-th smallest of the n
/// entries of that channel, so an all-equal channel is kept entirely.
inline Tensor index_mask(const Tensor& features, double q) {
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("index_mask: quantile must lie in (0, 1)");
  if (features.rank() != 3) throw DimensionError("index_mask: expected (C,N_c,N_t), got " + shape_str(features.shape()));
  const std::size_t C = features.dim(0), n = features.dim(1) * features.dim(2);
  const std::size_t k = std::min(n - 1, static_cast<std::size_t>(std::floor(q * static_cast<double>(n))));
  std::vector<double> mask(features.numel());
  std::vector<double> scratch(n);
  auto D = features.data();
  for (std::size_t c = 0; c < C; ++c) {
    const auto plane = D.subspan(c * n, n);
    std::copy(plane.begin(), plane.end(), scratch.begin());
    std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k), scratch.end());
    const double threshold = scratch[k];
    for (std::size_t i = 0; i < n; ++i) mask[c * n + i] = plane[i] >= threshold ? 1.0 : 0.0;
  }
  return Tensor(features.shape(), std::move(mask));
}

/// Stacks per-frame masks along a new leading time axis.
inline Tensor stack_masks(const std::vector<Tensor>& masks) {
  NoGradGuard no_grad;
  return stack(masks, 0).detach();
}

/// Index mask for one sequence (T, 2, N_c, N_t) -> (T, 64, N_c, N_t).
inline Tensor compute_index_mask(const Tensor& csi, const SfParams& params) {
  if (csi.rank() != 4 || csi.dim(1) != 2)
    throw DimensionError("compute_index_mask: expected (T,2,N_c,N_t), got " + shape_str(csi.shape()));
  NoGradGuard no_grad;
  std::vector<Tensor> masks;
  for (std::size_t t = 0; t < csi.dim(0); ++t) {
    const Tensor frame = select(csi, 0, t);
    masks.push_back(index_mask(mapping_layer(selfinfo_matrix(frame), params.mapping_kernel), params.quantile));
  }
  return stack_masks(masks);
}

/// Batched variant: (B, T, 2, N_c, N_t) -> (B, T, 64, N_c, N_t).
inline Tensor compute_index_mask_batch(const Tensor& batch, const SfParams& params) {
  if (batch.rank() == 4) return compute_index_mask(batch, params);
  if (batch.rank() != 5) throw DimensionError("compute_index_mask_batch: expected rank 5, got " + shape_str(batch.shape()));
  NoGradGuard no_grad;
  std::vector<Tensor> per_sample;
  for (std::size_t b = 0; b < batch.dim(0); ++b) per_sample.push_back(compute_index_mask(select(batch, 0, b), params));
  return stack(per_sample, 0).detach();
}

namespace detail {

// (B, C, T, H, W) layout throughout; mask (B, 64, T, H, W).
inline Tensor sf_forward_channels_first(const Tensor& x, const Tensor& mask, const SfParams& params) {
  const Tensor features = lrelu(conv3d(x, params.extract_kernel, {1, 1, 1}, {0, 1, 1}));
  if (features.shape() != mask.shape())
    throw DimensionError("sf_forward: mask " + shape_str(mask.shape()) + " vs features " + shape_str(features.shape()));
  const Tensor gated = mul(features, mask);
  return lrelu(conv3d(gated, params.restore_kernel, {1, 1, 1}, {0, 1, 1}));
}

}  // namespace detail

/// H_e from H_c. Accepts (T, 2, N_c, N_t) or (B, T, 2, N_c, N_t); `mask`
/// must match (with 64 in place of 2) or be undefined to compute it here.
/// The mask is a constant of the forward pass.
inline Tensor sf_forward(const Tensor& csi, const SfParams& params, const Tensor& mask = Tensor{}) {
  const bool batched = csi.rank() == 5;
  if (!batched && csi.rank() != 4) throw DimensionError("sf_forward: expected (T,2,N_c,N_t) or batched, got " + shape_str(csi.shape()));
  const Tensor x = batched ? csi : reshape(csi, {1, csi.dim(0), csi.dim(1), csi.dim(2), csi.dim(3)});
  Tensor m = mask.defined() ? mask : compute_index_mask_batch(csi, params);
  if (!batched && m.rank() == 4) m = reshape(m, {1, m.dim(0), m.dim(1), m.dim(2), m.dim(3)});
  if (m.rank() != 5 || m.dim(0) != x.dim(0) || m.dim(1) != x.dim(1) || m.dim(2) != kSfFeatures)
    throw DimensionError("sf_forward: mask shape " + shape_str(m.shape()) + " incompatible with input " + shape_str(x.shape()));
  const Tensor he = permute(detail::sf_forward_channels_first(permute(x, {0, 2, 1, 3, 4}), permute(m.detach(), {0, 2, 1, 3, 4}), params),
                            {0, 2, 1, 3, 4});
  return batched ? he : reshape(he, {he.dim(1), he.dim(2), he.dim(3), he.dim(4)});
}

}  // namespace sdcsi
