// SPDX-License-Identifier: Apache-2.0
#pragma once

// Lloyd-Max scalar quantiser.
//
// Codebook file layout (little-endian):
//   char[4] "SDCQ", u32 bits, u32 level count, f64 levels[count]

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <span>
#include <vector>

#include "sdcsi/dataset.hpp"

namespace sdcsi {

struct QuantizerCodebook {
  int bits = 0;
  std::vector<double> levels;      // strictly increasing
  std::vector<double> thresholds;  // midpoints of adjacent levels
  bool degenerate = false;         // fewer distinct samples than 2^bits

  std::size_t size() const { return levels.size(); }

  static QuantizerCodebook from_levels(int bits, std::vector<double> levels) {
    QuantizerCodebook b;
    b.bits = bits;
    b.levels = std::move(levels);
    if (b.levels.empty()) throw DataError("codebook has no levels");
    if (b.levels.size() > (std::size_t{1} << bits)) throw DataError("codebook has more levels than 2^bits");
    for (std::size_t k = 1; k < b.levels.size(); ++k)
      if (!(b.levels[k] > b.levels[k - 1])) throw DataError("codebook levels must be strictly increasing");
    b.thresholds.resize(b.levels.size() - 1);
    for (std::size_t k = 0; k + 1 < b.levels.size(); ++k) b.thresholds[k] = 0.5 * (b.levels[k] + b.levels[k + 1]);
    b.degenerate = b.levels.size() < (std::size_t{1} << bits);
    return b;
  }

  /// Cell index of x: the number of thresholds <= x, so a value exactly on a
  /// threshold goes to the upper cell.
  std::size_t index_of(double x) const {
    return static_cast<std::size_t>(std::upper_bound(thresholds.begin(), thresholds.end(), x) - thresholds.begin());
  }

  /// Mean squared error of quantising `samples` with this codebook.
  double distortion(std::span<const double> samples) const {
    double s = 0.0;
    for (double x : samples) {
      const double e = x - levels[index_of(x)];
      s += e * e;
    }
    return samples.empty() ? 0.0 : s / static_cast<double>(samples.size());
  }
};

struct LloydMaxOptions {
  int max_iters = 500;
  double tol = 1e-9;
};

/// Trains a 2^bits-level codebook. Levels start at the sample quantiles
/// (k + 1/2) / 2^bits and alternate between midpoint thresholds and cell
/// centroids until no level moves by `tol`. `distortion_trace`, when given,
/// receives the distortion of the initial codebook and of each iterate.
inline QuantizerCodebook train_lloyd_max(std::span<const double> samples, int bits, LloydMaxOptions opt = {},
                                         std::vector<double>* distortion_trace = nullptr) {
  if (samples.empty()) throw DataError("train_lloyd_max: no samples");
  if (bits < 1 || bits > 16) throw ConfigError("train_lloyd_max: bits must lie in [1, 16]");
  const std::size_t L = std::size_t{1} << bits;
  std::vector<double> x(samples.begin(), samples.end());
  for (double v : x)
    if (!std::isfinite(v)) throw DataError("train_lloyd_max: non-finite sample");
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();

  std::vector<double> distinct;
  for (double v : x)
    if (distinct.empty() || v != distinct.back()) distinct.push_back(v);
  if (distinct.size() <= L) {
    if (distinct.size() < L)
      std::cerr << "warning: " << distinct.size() << " distinct samples for " << L
                << " levels; duplicate levels collapsed\n";
    auto book = QuantizerCodebook::from_levels(bits, distinct);
    if (distortion_trace) distortion_trace->assign(1, book.distortion(x));
    return book;
  }

  // Prefix sums make cell centroids O(L log n) per iteration.
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];

  std::vector<double> levels(L);
  for (std::size_t k = 0; k < L; ++k) {
    const auto idx = std::min(n - 1, static_cast<std::size_t>((static_cast<double>(k) + 0.5) / static_cast<double>(L) * static_cast<double>(n)));
    levels[k] = x[idx];
  }
  // Quantiles can coincide on heavily repeated values; spread duplicates
  // into the widest gaps.
  auto make_unique = [&](std::vector<double>& lv) {
    std::sort(lv.begin(), lv.end());
    lv.erase(std::unique(lv.begin(), lv.end()), lv.end());
    while (lv.size() < L) {
      std::vector<double> edges{x.front()};
      edges.insert(edges.end(), lv.begin(), lv.end());
      edges.push_back(x.back());
      std::size_t widest = 0;
      for (std::size_t k = 1; k + 1 < edges.size(); ++k)
        if (edges[k + 1] - edges[k] > edges[widest + 1] - edges[widest]) widest = k;
      lv.push_back(0.5 * (edges[widest] + edges[widest + 1]));
      std::sort(lv.begin(), lv.end());
      lv.erase(std::unique(lv.begin(), lv.end()), lv.end());
    }
  };
  make_unique(levels);

  if (distortion_trace) distortion_trace->assign(1, QuantizerCodebook::from_levels(bits, levels).distortion(x));

  std::vector<double> next(L);
  for (int iter = 0; iter < opt.max_iters; ++iter) {
    // Cell k holds x in [t_{k-1}, t_k).
    std::size_t begin = 0;
    bool empty_cell = false;
    for (std::size_t k = 0; k < L; ++k) {
      std::size_t end = n;
      if (k + 1 < L) {
        const double t = 0.5 * (levels[k] + levels[k + 1]);
        end = static_cast<std::size_t>(std::lower_bound(x.begin() + static_cast<std::ptrdiff_t>(begin), x.end(), t) - x.begin());
      }
      if (end > begin) {
        next[k] = (prefix[end] - prefix[begin]) / static_cast<double>(end - begin);
      } else {
        next[k] = levels[k];
        empty_cell = true;
      }
      begin = end;
    }
    if (empty_cell) {
      // Re-seed empty cells at the midpoint of the widest non-empty cell.
      std::vector<double> kept;
      std::size_t b = 0;
      for (std::size_t k = 0; k < L; ++k) {
        std::size_t e = n;
        if (k + 1 < L)
          e = static_cast<std::size_t>(std::lower_bound(x.begin() + static_cast<std::ptrdiff_t>(b), x.end(), 0.5 * (levels[k] + levels[k + 1])) - x.begin());
        if (e > b) kept.push_back(next[k]);
        b = e;
      }
      make_unique(kept);
      next = kept;
    }
    double moved = 0.0;
    for (std::size_t k = 0; k < L; ++k) moved = std::max(moved, std::abs(next[k] - levels[k]));
    levels.swap(next);
    std::sort(levels.begin(), levels.end());
    if (distortion_trace) distortion_trace->push_back(QuantizerCodebook::from_levels(bits, levels).distortion(x));
    if (moved < opt.tol) break;
  }
  return QuantizerCodebook::from_levels(bits, levels);
}

/// Quantised codeword: one cell index per element, original shape kept.
struct QuantizedCodeword {
  Shape shape;
  std::vector<std::uint32_t> indices;
};

inline QuantizedCodeword quantize(const Tensor& c, const QuantizerCodebook& book) {
  QuantizedCodeword q{c.shape(), std::vector<std::uint32_t>(c.numel())};
  for (std::size_t i = 0; i < c.numel(); ++i) q.indices[i] = static_cast<std::uint32_t>(book.index_of(c[i]));
  return q;
}

inline Tensor dequantize(const QuantizedCodeword& q, const QuantizerCodebook& book) {
  std::vector<double> out(q.indices.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (q.indices[i] >= book.size())
      throw DataError("quantisation index " + std::to_string(q.indices[i]) + " out of range [0, " +
                      std::to_string(book.size()) + ")");
    out[i] = book.levels[q.indices[i]];
  }
  return Tensor(q.shape, std::move(out));
}

inline void write_codebook(const QuantizerCodebook& book, std::ostream& os) {
  os.write("SDCQ", 4);
  io::put<std::uint32_t>(os, static_cast<std::uint32_t>(book.bits));
  io::put<std::uint32_t>(os, static_cast<std::uint32_t>(book.levels.size()));
  for (double v : book.levels) io::put<double>(os, v);
}

inline void write_codebook(const QuantizerCodebook& book, const std::string& path) {
  auto os = io::open_out(path);
  write_codebook(book, os);
  if (!os) throw DataError("write failed for '" + path + "'");
}

inline QuantizerCodebook read_codebook(std::istream& is) {
  io::expect_magic(is, "SDCQ");
  const auto bits = io::get<std::uint32_t>(is, "bits");
  if (bits < 1 || bits > 16) throw DataError("codebook bits out of range");
  const auto count = io::get<std::uint32_t>(is, "level count");
  std::vector<double> levels(count);
  for (auto& v : levels) v = io::get<double>(is, "level");
  return QuantizerCodebook::from_levels(static_cast<int>(bits), std::move(levels));
}

inline QuantizerCodebook read_codebook(const std::string& path) {
  auto is = io::open_in(path);
  return read_codebook(is);
}

}  // namespace sdcsi
