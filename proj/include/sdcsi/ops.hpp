// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sdcsi/tensor.hpp"

namespace sdcsi {

namespace detail {

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

inline void accumulate(std::vector<double>& dst, std::span<const double> src) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

// Unary elementwise op given value and derivative-from-(input, output).
template <class F, class DF>
Tensor unary(const Tensor& x, F f, DF df) {
  std::vector<double> out(x.numel());
  auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return make_result(x.shape(), std::move(out), {x}, [df](Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * df(p.data[i], self.data[i]);
  });
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    for (auto& p : self.parents)
      if (p->requires_grad) detail::accumulate(p->grad_buffer(), self.grad);
  });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    if (self.parents[0]->requires_grad) detail::accumulate(self.parents[0]->grad_buffer(), self.grad);
    if (self.parents[1]->requires_grad) {
      auto& g = self.parents[1]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

/// Elementwise (Hadamard) product. A constant operand such as a binary mask
/// simply does not receive a gradient.
inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return detail::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.data[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.data[i];
    }
  });
}

inline Tensor scale(const Tensor& a, double s) {
  return detail::unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

inline Tensor lrelu(const Tensor& x, double slope = 0.3) {
  return detail::unary(
      x, [slope](double v) { return v >= 0.0 ? v : slope * v; },
      [slope](double v, double) { return v >= 0.0 ? 1.0 : slope; });
}

inline Tensor sigmoid(const Tensor& x) {
  return detail::unary(
      x,
      [](double v) {
        // Split by sign so exp() never overflows.
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh(const Tensor& x) {
  return detail::unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

inline Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return detail::make_result({1}, {s}, {x}, [](detail::Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (auto& v : g) v += self.grad[0];
  });
}

inline Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

inline Tensor mse_loss(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mse_loss");
  const double n = static_cast<double>(a.numel());
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return detail::make_result({1}, {s / n}, {a, b}, [n](detail::Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    const double k = 2.0 * self.grad[0] / n;
    if (pa.requires_grad) {
      auto& g = pa.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += k * (pa.data[i] - pb.data[i]);
    }
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= k * (pa.data[i] - pb.data[i]);
    }
  });
}

// ---------------------------------------------------------------------------
// Layout

inline Tensor reshape(const Tensor& x, Shape shape) {
  if (numel_of(shape) != x.numel())
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  std::vector<double> data(x.data().begin(), x.data().end());
  return detail::make_result(std::move(shape), std::move(data), {x}, [](detail::Node& self) {
    detail::accumulate(self.parents[0]->grad_buffer(), self.grad);
  });
}

/// Generalised transpose: out.shape[i] = x.shape[perm[i]].
inline Tensor permute(const Tensor& x, const std::vector<std::size_t>& perm) {
  const std::size_t r = x.rank();
  if (perm.size() != r) throw DimensionError("permute: permutation rank mismatch");
  std::vector<bool> used(r, false);
  for (auto p : perm) {
    if (p >= r || used[p]) throw DimensionError("permute: invalid permutation");
    used[p] = true;
  }
  Shape out_shape(r);
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t i = r; i-- > 1;) in_strides[i - 1] = in_strides[i] * x.dim(i);
  std::vector<std::size_t> stride_of_out(r);
  for (std::size_t i = 0; i < r; ++i) {
    out_shape[i] = x.dim(perm[i]);
    stride_of_out[i] = in_strides[perm[i]];
  }
  // src[k] = input offset of output element k.
  const std::size_t n = x.numel();
  std::vector<std::size_t> src(n);
  std::vector<std::size_t> idx(r, 0);
  std::size_t off = 0;
  for (std::size_t k = 0; k < n; ++k) {
    src[k] = off;
    for (std::size_t a = r; a-- > 0;) {
      if (++idx[a] < out_shape[a]) {
        off += stride_of_out[a];
        break;
      }
      off -= stride_of_out[a] * (out_shape[a] - 1);
      idx[a] = 0;
    }
  }
  std::vector<double> out(n);
  auto in = x.data();
  for (std::size_t k = 0; k < n; ++k) out[k] = in[src[k]];
  return detail::make_result(std::move(out_shape), std::move(out), {x},
                             [src = std::move(src)](detail::Node& self) {
                               auto& g = self.parents[0]->grad_buffer();
                               for (std::size_t k = 0; k < src.size(); ++k) g[src[k]] += self.grad[k];
                             });
}

namespace detail {
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};
inline AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit a;
  for (std::size_t i = 0; i < axis; ++i) a.outer *= s[i];
  a.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) a.inner *= s[i];
  return a;
}
}  // namespace detail

/// Removes `axis` by taking element `index` along it.
inline Tensor select(const Tensor& x, std::size_t axis, std::size_t index) {
  if (axis >= x.rank() || index >= x.dim(axis))
    throw DimensionError("select: index out of range for " + shape_str(x.shape()));
  const auto sp = detail::split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (out_shape.empty()) out_shape = {1};
  std::vector<double> out(sp.outer * sp.inner);
  auto in = x.data();
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t i = 0; i < sp.inner; ++i)
      out[o * sp.inner + i] = in[(o * sp.extent + index) * sp.inner + i];
  return detail::make_result(std::move(out_shape), std::move(out), {x}, [sp, index](detail::Node& self) {
    auto& g = self.parents[0]->grad_buffer();
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t i = 0; i < sp.inner; ++i)
        g[(o * sp.extent + index) * sp.inner + i] += self.grad[o * sp.inner + i];
  });
}

/// Stacks equally shaped tensors along a new axis.
inline Tensor stack(const std::vector<Tensor>& xs, std::size_t axis) {
  if (xs.empty()) throw DimensionError("stack: no inputs");
  const Shape& base = xs.front().shape();
  for (const auto& t : xs)
    if (t.shape() != base)
      throw DimensionError("stack: shape mismatch " + shape_str(base) + " vs " + shape_str(t.shape()));
  if (axis > base.size()) throw DimensionError("stack: axis out of range");
  Shape out_shape = base;
  out_shape.insert(out_shape.begin() + static_cast<std::ptrdiff_t>(axis), xs.size());
  const auto sp = detail::split_at(out_shape, axis);
  std::vector<double> out(numel_of(out_shape));
  for (std::size_t k = 0; k < xs.size(); ++k) {
    auto in = xs[k].data();
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t i = 0; i < sp.inner; ++i)
        out[(o * sp.extent + k) * sp.inner + i] = in[o * sp.inner + i];
  }
  return detail::make_result(std::move(out_shape), std::move(out), xs, [sp](detail::Node& self) {
    for (std::size_t k = 0; k < self.parents.size(); ++k) {
      auto& p = *self.parents[k];
      if (!p.requires_grad) continue;
      auto& g = p.grad_buffer();
      for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t i = 0; i < sp.inner; ++i)
          g[o * sp.inner + i] += self.grad[(o * sp.extent + k) * sp.inner + i];
    }
  });
}

/// Concatenates two tensors along their last axis.
inline Tensor concat_last(const Tensor& a, const Tensor& b) {
  if (a.rank() != b.rank() || a.rank() == 0 ||
      !std::equal(a.shape().begin(), a.shape().end() - 1, b.shape().begin()))
    throw DimensionError("concat_last: incompatible " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  const std::size_t na = a.shape().back(), nb = b.shape().back();
  const std::size_t rows = a.numel() / na;
  Shape out_shape = a.shape();
  out_shape.back() = na + nb;
  std::vector<double> out(rows * (na + nb));
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(r * na), na, out.begin() + static_cast<std::ptrdiff_t>(r * (na + nb)));
    std::copy_n(b.data().begin() + static_cast<std::ptrdiff_t>(r * nb), nb,
                out.begin() + static_cast<std::ptrdiff_t>(r * (na + nb) + na));
  }
  return detail::make_result(std::move(out_shape), std::move(out), {a, b},
                             [rows, na, nb](detail::Node& self) {
                               auto& pa = *self.parents[0];
                               auto& pb = *self.parents[1];
                               const std::size_t w = na + nb;
                               if (pa.requires_grad) {
                                 auto& g = pa.grad_buffer();
                                 for (std::size_t r = 0; r < rows; ++r)
                                   for (std::size_t i = 0; i < na; ++i) g[r * na + i] += self.grad[r * w + i];
                               }
                               if (pb.requires_grad) {
                                 auto& g = pb.grad_buffer();
                                 for (std::size_t r = 0; r < rows; ++r)
                                   for (std::size_t i = 0; i < nb; ++i) g[r * nb + i] += self.grad[r * w + na + i];
                               }
                             });
}

/// x[..., start:start+length].
inline Tensor slice_last(const Tensor& x, std::size_t start, std::size_t length) {
  const std::size_t n = x.shape().back();
  if (length == 0 || start + length > n) throw DimensionError("slice_last: range out of bounds");
  const std::size_t rows = x.numel() / n;
  Shape out_shape = x.shape();
  out_shape.back() = length;
  std::vector<double> out(rows * length);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < length; ++i) out[r * length + i] = x[r * n + start + i];
  return detail::make_result(std::move(out_shape), std::move(out), {x},
                             [rows, n, start, length](detail::Node& self) {
                               auto& g = self.parents[0]->grad_buffer();
                               for (std::size_t r = 0; r < rows; ++r)
                                 for (std::size_t i = 0; i < length; ++i)
                                   g[r * n + start + i] += self.grad[r * length + i];
                             });
}

// ---------------------------------------------------------------------------
// Dense algebra

/// (rows, K) x (K, N) -> (rows, N). Leading axes of `a` are flattened.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (b.rank() != 2 || a.shape().back() != b.dim(0))
    throw DimensionError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const std::size_t K = b.dim(0), N = b.dim(1), rows = a.numel() / K;
  Shape out_shape = a.shape();
  out_shape.back() = N;
  std::vector<double> out(rows * N, 0.0);
  auto A = a.data();
  auto B = b.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double* o = out.data() + r * N;
    for (std::size_t k = 0; k < K; ++k) {
      const double s = A[r * K + k];
      if (s == 0.0) continue;
      const double* brow = B.data() + k * N;
      for (std::size_t n = 0; n < N; ++n) o[n] += s * brow[n];
    }
  }
  return detail::make_result(std::move(out_shape), std::move(out), {a, b}, [rows, K, N](detail::Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    const double* G = self.grad.data();
    if (pa.requires_grad) {
      auto& ga = pa.grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < K; ++k) {
          const double* brow = pb.data.data() + k * N;
          double s = 0.0;
          for (std::size_t n = 0; n < N; ++n) s += G[r * N + n] * brow[n];
          ga[r * K + k] += s;
        }
    }
    if (pb.requires_grad) {
      auto& gb = pb.grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < K; ++k) {
          const double s = pa.data[r * K + k];
          if (s == 0.0) continue;
          double* grow = gb.data() + k * N;
          for (std::size_t n = 0; n < N; ++n) grow[n] += s * G[r * N + n];
        }
    }
  });
}

/// Adds a bias vector along the last axis.
inline Tensor add_bias_last(const Tensor& x, const Tensor& bias) {
  const std::size_t n = x.shape().back();
  if (bias.numel() != n)
    throw DimensionError("add_bias_last: bias length " + std::to_string(bias.numel()) +
                         " vs last axis " + std::to_string(n));
  std::vector<double> out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bias[i % n];
  return detail::make_result(x.shape(), std::move(out), {x, bias}, [n](detail::Node& self) {
    auto& px = *self.parents[0];
    auto& pb = *self.parents[1];
    if (px.requires_grad) detail::accumulate(px.grad_buffer(), self.grad);
    if (pb.requires_grad) {
      auto& g = pb.grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % n] += self.grad[i];
    }
  });
}

/// Kernel-length-1 convolution over a sequence: the same affine map
/// out[..., o] = bias[o] + sum_i weight[o, i] * x[..., i] applied at every
/// leading index (every time step).
inline Tensor conv1d_dense(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 2 || x.shape().back() != weight.dim(1))
    throw DimensionError("conv1d_dense: input channels " + std::to_string(x.shape().back()) +
                         " vs weight " + shape_str(weight.shape()));
  const std::size_t cin = weight.dim(1), cout = weight.dim(0), rows = x.numel() / cin;
  const bool has_bias = bias.defined();
  if (has_bias && bias.numel() != cout)
    throw DimensionError("conv1d_dense: bias length " + std::to_string(bias.numel()) +
                         " vs output channels " + std::to_string(cout));
  Shape out_shape = x.shape();
  out_shape.back() = cout;
  std::vector<double> out(rows * cout);
  auto X = x.data();
  auto W = weight.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = X.data() + r * cin;
    for (std::size_t o = 0; o < cout; ++o) {
      const double* wr = W.data() + o * cin;
      double s = has_bias ? bias[o] : 0.0;
      for (std::size_t i = 0; i < cin; ++i) s += wr[i] * xr[i];
      out[r * cout + o] = s;
    }
  }
  std::vector<Tensor> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return detail::make_result(std::move(out_shape), std::move(out), std::move(inputs),
                             [rows, cin, cout](detail::Node& self) {
                               auto& px = *self.parents[0];
                               auto& pw = *self.parents[1];
                               const double* G = self.grad.data();
                               if (px.requires_grad) {
                                 auto& gx = px.grad_buffer();
                                 for (std::size_t r = 0; r < rows; ++r)
                                   for (std::size_t o = 0; o < cout; ++o) {
                                     const double g = G[r * cout + o];
                                     const double* wr = pw.data.data() + o * cin;
                                     double* gr = gx.data() + r * cin;
                                     for (std::size_t i = 0; i < cin; ++i) gr[i] += g * wr[i];
                                   }
                               }
                               if (pw.requires_grad) {
                                 auto& gw = pw.grad_buffer();
                                 for (std::size_t r = 0; r < rows; ++r)
                                   for (std::size_t o = 0; o < cout; ++o) {
                                     const double g = G[r * cout + o];
                                     const double* xr = px.data.data() + r * cin;
                                     double* gr = gw.data() + o * cin;
                                     for (std::size_t i = 0; i < cin; ++i) gr[i] += g * xr[i];
                                   }
                               }
                               if (self.parents.size() > 2 && self.parents[2]->requires_grad) {
                                 auto& gb = self.parents[2]->grad_buffer();
                                 for (std::size_t r = 0; r < rows; ++r)
                                   for (std::size_t o = 0; o < cout; ++o) gb[o] += G[r * cout + o];
                               }
                             });
}

/// Max pooling along the last axis. Gradient goes to the first maximal
/// element of each window.
inline Tensor maxpool_lastaxis(const Tensor& x, std::size_t window, std::size_t stride) {
  const std::size_t L = x.shape().back();
  if (window == 0 || stride == 0) throw DimensionError("maxpool_lastaxis: window and stride must be >= 1");
  if (L % stride != 0)
    throw DimensionError("maxpool_lastaxis: last axis " + std::to_string(L) +
                         " not divisible by stride " + std::to_string(stride));
  const std::size_t out_len = L / stride, rows = x.numel() / L;
  Shape out_shape = x.shape();
  out_shape.back() = out_len;
  std::vector<double> out(rows * out_len);
  std::vector<std::size_t> arg(rows * out_len);
  auto X = x.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < out_len; ++j) {
      const std::size_t begin = j * stride, end = std::min(begin + window, L);
      std::size_t best = begin;
      for (std::size_t i = begin + 1; i < end; ++i)
        if (X[r * L + i] > X[r * L + best]) best = i;
      out[r * out_len + j] = X[r * L + best];
      arg[r * out_len + j] = r * L + best;
    }
  return detail::make_result(std::move(out_shape), std::move(out), {x},
                             [arg = std::move(arg)](detail::Node& self) {
                               auto& g = self.parents[0]->grad_buffer();
                               for (std::size_t k = 0; k < arg.size(); ++k) g[arg[k]] += self.grad[k];
                             });
}

}  // namespace sdcsi
