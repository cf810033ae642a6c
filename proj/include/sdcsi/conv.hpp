// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <string>

#include "sdcsi/ops.hpp"

namespace sdcsi {

using Triple = std::array<std::size_t, 3>;
using Pair = std::array<std::size_t, 2>;

namespace detail {

struct Conv3dGeometry {
  std::size_t n, cin, d, h, w;
  std::size_t cout, kd, kh, kw;
  Triple stride, pad;
  std::size_t od, oh, ow;
};

inline Conv3dGeometry conv3d_geometry(const Shape& in, const Shape& k, Triple stride, Triple pad) {
  if (in.size() != 5) throw DimensionError("conv3d: input must be (N,C,D,H,W), got " + shape_str(in));
  if (k.size() != 5) throw DimensionError("conv3d: kernel must be (Cout,Cin,kd,kh,kw), got " + shape_str(k));
  if (in[1] != k[1])
    throw DimensionError("conv3d: input channels " + std::to_string(in[1]) + " vs kernel channels " +
                         std::to_string(k[1]) + " (axis 1)");
  for (std::size_t a = 0; a < 3; ++a) {
    if (stride[a] == 0) throw DimensionError("conv3d: zero stride on spatial axis " + std::to_string(a));
    if (k[2 + a] > in[2 + a] + 2 * pad[a])
      throw DimensionError("conv3d: kernel extent " + std::to_string(k[2 + a]) + " exceeds padded input " +
                           std::to_string(in[2 + a] + 2 * pad[a]) + " on spatial axis " + std::to_string(a));
  }
  Conv3dGeometry g{in[0], in[1], in[2], in[3], in[4], k[0], k[2], k[3], k[4], stride, pad, 0, 0, 0};
  g.od = (g.d + 2 * pad[0] - g.kd) / stride[0] + 1;
  g.oh = (g.h + 2 * pad[1] - g.kh) / stride[1] + 1;
  g.ow = (g.w + 2 * pad[2] - g.kw) / stride[2] + 1;
  return g;
}

// Range of output columns whose input column ow*s - p + k lands in [0, w).
inline std::pair<std::size_t, std::size_t> valid_cols(std::size_t w, std::size_t out, std::size_t s,
                                                      std::size_t p, std::size_t k) {
  const long lo_num = static_cast<long>(p) - static_cast<long>(k);
  const long lo = lo_num <= 0 ? 0 : (lo_num + static_cast<long>(s) - 1) / static_cast<long>(s);
  const long hi_num = static_cast<long>(w) - 1 + static_cast<long>(p) - static_cast<long>(k);
  if (hi_num < 0) return {0, 0};
  const long hi = std::min<long>(hi_num / static_cast<long>(s) + 1, static_cast<long>(out));
  return {static_cast<std::size_t>(std::min(lo, hi)), static_cast<std::size_t>(hi)};
}

// Flat index of input column 0*stride for a given row and kernel column;
// may be negative, only offsets inside the valid column range are used.
inline std::ptrdiff_t column_base(std::size_t row, std::size_t kcol, std::size_t pad) {
  return static_cast<std::ptrdiff_t>(row) + static_cast<std::ptrdiff_t>(kcol) - static_cast<std::ptrdiff_t>(pad);
}

// Visits every (output row, input row, weight) triple of the direct
// convolution; fn receives the flat output row offset, input row offset,
// weight index and the valid column range.
template <class Fn>
void for_each_conv3d_row(const Conv3dGeometry& g, Fn&& fn) {
  for (std::size_t n = 0; n < g.n; ++n)
    for (std::size_t co = 0; co < g.cout; ++co)
      for (std::size_t ci = 0; ci < g.cin; ++ci)
        for (std::size_t a = 0; a < g.kd; ++a)
          for (std::size_t b = 0; b < g.kh; ++b)
            for (std::size_t c = 0; c < g.kw; ++c) {
              const std::size_t widx = (((co * g.cin + ci) * g.kd + a) * g.kh + b) * g.kw + c;
              const auto [lo, hi] = valid_cols(g.w, g.ow, g.stride[2], g.pad[2], c);
              if (lo >= hi) continue;
              for (std::size_t od = 0; od < g.od; ++od) {
                const long id = static_cast<long>(od * g.stride[0] + a) - static_cast<long>(g.pad[0]);
                if (id < 0 || id >= static_cast<long>(g.d)) continue;
                for (std::size_t oh = 0; oh < g.oh; ++oh) {
                  const long ih = static_cast<long>(oh * g.stride[1] + b) - static_cast<long>(g.pad[1]);
                  if (ih < 0 || ih >= static_cast<long>(g.h)) continue;
                  const std::size_t out_row = (((n * g.cout + co) * g.od + od) * g.oh + oh) * g.ow;
                  const std::size_t in_row =
                      (((n * g.cin + ci) * g.d + static_cast<std::size_t>(id)) * g.h + static_cast<std::size_t>(ih)) * g.w;
                  fn(out_row, in_row, widx, lo, hi, c);
                }
              }
            }
}

}  // namespace detail

/// 3D cross-correlation, NCDHW layout, zero padding. `bias` may be an
/// undefined Tensor.
inline Tensor conv3d(const Tensor& input, const Tensor& kernel, const Tensor& bias, Triple stride,
                     Triple padding) {
  const auto g = detail::conv3d_geometry(input.shape(), kernel.shape(), stride, padding);
  const bool has_bias = bias.defined();
  if (has_bias && bias.numel() != g.cout)
    throw DimensionError("conv3d: bias length " + std::to_string(bias.numel()) + " vs output channels " +
                         std::to_string(g.cout));
  const std::size_t plane = g.od * g.oh * g.ow;
  std::vector<double> out(g.n * g.cout * plane, 0.0);
  if (has_bias)
    for (std::size_t n = 0; n < g.n; ++n)
      for (std::size_t co = 0; co < g.cout; ++co)
        std::fill_n(out.begin() + static_cast<std::ptrdiff_t>((n * g.cout + co) * plane), plane, bias[co]);
  const double* X = input.data().data();
  const double* K = kernel.data().data();
  const std::size_t sw = g.stride[2], pw = g.pad[2];
  detail::for_each_conv3d_row(g, [&](std::size_t orow, std::size_t irow, std::size_t widx, std::size_t lo,
                                     std::size_t hi, std::size_t c) {
    const double wv = K[widx];
    double* o = out.data() + orow;
    const std::ptrdiff_t base = detail::column_base(irow, c, pw);
    if (sw == 1) {
      const double* x = X + base + static_cast<std::ptrdiff_t>(lo);
      for (std::size_t i = 0; i < hi - lo; ++i) o[lo + i] += wv * x[i];
    } else {
      for (std::size_t ow = lo; ow < hi; ++ow) o[ow] += wv * X[base + static_cast<std::ptrdiff_t>(ow * sw)];
    }
  });

  std::vector<Tensor> inputs{input, kernel};
  if (has_bias) inputs.push_back(bias);
  return detail::make_result(
      {g.n, g.cout, g.od, g.oh, g.ow}, std::move(out), std::move(inputs), [g, plane](detail::Node& self) {
        auto& px = *self.parents[0];
        auto& pk = *self.parents[1];
        const double* G = self.grad.data();
        const std::size_t sw = g.stride[2], pw = g.pad[2];
        if (px.requires_grad) {
          auto& gx = px.grad_buffer();
          const double* K = pk.data.data();
          detail::for_each_conv3d_row(g, [&](std::size_t orow, std::size_t irow, std::size_t widx,
                                             std::size_t lo, std::size_t hi, std::size_t c) {
            const double wv = K[widx];
            const double* go = G + orow;
            const std::ptrdiff_t base = detail::column_base(irow, c, pw);
            for (std::size_t ow = lo; ow < hi; ++ow) gx[static_cast<std::size_t>(base + static_cast<std::ptrdiff_t>(ow * sw))] += wv * go[ow];
          });
        }
        if (pk.requires_grad) {
          auto& gk = pk.grad_buffer();
          const double* X = px.data.data();
          detail::for_each_conv3d_row(g, [&](std::size_t orow, std::size_t irow, std::size_t widx,
                                             std::size_t lo, std::size_t hi, std::size_t c) {
            const double* go = G + orow;
            const std::ptrdiff_t base = detail::column_base(irow, c, pw);
            double s = 0.0;
            for (std::size_t ow = lo; ow < hi; ++ow) s += go[ow] * X[base + static_cast<std::ptrdiff_t>(ow * sw)];
            gk[widx] += s;
          });
        }
        if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
          auto& gb = self.parents[2]->grad_buffer();
          for (std::size_t n = 0; n < g.n; ++n)
            for (std::size_t co = 0; co < g.cout; ++co) {
              const double* go = G + (n * g.cout + co) * plane;
              double s = 0.0;
              for (std::size_t i = 0; i < plane; ++i) s += go[i];
              gb[co] += s;
            }
        }
      });
}

inline Tensor conv3d(const Tensor& input, const Tensor& kernel, Triple stride = {1, 1, 1},
                     Triple padding = {0, 0, 0}) {
  return conv3d(input, kernel, Tensor{}, stride, padding);
}

/// 2D cross-correlation, NCHW layout; a depth-1 conv3d.
inline Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, Pair stride, Pair padding) {
  if (input.rank() != 4) throw DimensionError("conv2d: input must be (N,C,H,W), got " + shape_str(input.shape()));
  if (kernel.rank() != 4)
    throw DimensionError("conv2d: kernel must be (Cout,Cin,kh,kw), got " + shape_str(kernel.shape()));
  const auto& s = input.shape();
  const auto& k = kernel.shape();
  Tensor out = conv3d(reshape(input, {s[0], s[1], 1, s[2], s[3]}), reshape(kernel, {k[0], k[1], 1, k[2], k[3]}),
                      bias, {1, stride[0], stride[1]}, {0, padding[0], padding[1]});
  const auto& o = out.shape();
  return reshape(out, {o[0], o[1], o[3], o[4]});
}

inline Tensor conv2d(const Tensor& input, const Tensor& kernel, Pair stride = {1, 1}, Pair padding = {0, 0}) {
  return conv2d(input, kernel, Tensor{}, stride, padding);
}

}  // namespace sdcsi
