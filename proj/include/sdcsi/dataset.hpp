// SPDX-License-Identifier: Apache-2.0
#pragma once

// In-memory CSI dataset and its binary container.
//
// File layout (little-endian):
//   char[4]  "SDCD"
//   u32      version = 1
//   u32      num_samples, T, 2, N_c, N_t
//   f32      payload, row-major (num_samples, T, 2, N_c, N_t)
//   f64      offset, scale

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "sdcsi/channel.hpp"

namespace sdcsi {

struct Dataset {
  std::size_t num_samples = 0;
  std::size_t T = 0, nc = 0, nt = 0;
  std::vector<double> values;  // normalised, (num_samples, T, 2, N_c, N_t)
  NormRecord norm;

  std::size_t sample_size() const { return T * 2 * nc * nt; }
  Shape sample_shape() const { return {T, 2, nc, nt}; }

  Tensor sample(std::size_t i) const { return batch({i}); }

  /// Gathers the listed samples into (B, T, 2, N_c, N_t); a single index
  /// yields (T, 2, N_c, N_t).
  Tensor batch(const std::vector<std::size_t>& indices) const {
    const std::size_t n = sample_size();
    std::vector<double> out(indices.size() * n);
    for (std::size_t k = 0; k < indices.size(); ++k) {
      if (indices[k] >= num_samples) throw DataError("sample index " + std::to_string(indices[k]) + " out of range");
      std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(indices[k] * n), n,
                  out.begin() + static_cast<std::ptrdiff_t>(k * n));
    }
    if (indices.size() == 1) return Tensor(sample_shape(), std::move(out));
    return Tensor({indices.size(), T, 2, nc, nt}, std::move(out));
  }
};

/// Contiguous train / validation / test index ranges.
struct Splits {
  std::vector<std::size_t> train, val, test;
};

inline Splits make_splits(std::size_t n, double train_frac, double val_frac) {
  if (train_frac <= 0.0 || val_frac < 0.0 || train_frac + val_frac >= 1.0)
    throw ConfigError("split fractions must satisfy 0 < train, 0 <= val, train + val < 1");
  const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(val_frac * static_cast<double>(n)));
  if (n_train == 0 || (val_frac > 0.0 && n_val == 0) || n_train + n_val >= n) throw ConfigError("dataset of " + std::to_string(n) + " samples too small for the requested splits");
  Splits s;
  for (std::size_t i = 0; i < n; ++i) (i < n_train ? s.train : i < n_train + n_val ? s.val : s.test).push_back(i);
  return s;
}

/// Sample i uses seed base.seed + i; all samples share one symmetric
/// normalisation fitted over the whole set.
inline Dataset make_dataset(const MultipathParams& base, std::size_t num_samples, std::size_t T, std::size_t n_s,
                            std::size_t n_t, std::size_t n_c) {
  if (num_samples == 0) throw ConfigError("dataset needs at least one sample");
  if (n_c == 0 || n_c > n_s) throw ConfigError("N_c must lie in [1, N_s]");
  const std::size_t reach = base.delay_taps.empty()
                                ? base.max_delay_tap
                                : *std::max_element(base.delay_taps.begin(), base.delay_taps.end()) + 1;
  if (reach > n_c)
    throw ConfigError("delay taps reach row " + std::to_string(reach - 1) + " but only N_c = " + std::to_string(n_c) +
                      " rows are kept");
  Dataset ds;
  ds.num_samples = num_samples;
  ds.T = T;
  ds.nc = n_c;
  ds.nt = n_t;
  ds.values.reserve(num_samples * ds.sample_size());
  for (std::size_t i = 0; i < num_samples; ++i) {
    MultipathParams p = base;
    p.seed = base.seed + i;
    const Tensor v = angular_delay_values(generate_sequence(p, T, n_s, n_t), n_c);
    ds.values.insert(ds.values.end(), v.data().begin(), v.data().end());
  }
  ds.norm = NormRecord::symmetric(max_abs(ds.values));
  for (auto& x : ds.values) x = ds.norm.normalize(x);
  return ds;
}

namespace io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is, const std::string& what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw DataError("truncated file while reading " + what);
  return v;
}

inline void expect_magic(std::istream& is, const char* magic) {
  char m[4]{};
  if (!is.read(m, 4) || std::memcmp(m, magic, 4) != 0)
    throw DataError(std::string("bad magic, expected \"") + magic + "\"");
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  return os;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path + "'");
  return is;
}

}  // namespace io

inline void write_dataset(const Dataset& ds, std::ostream& os) {
  os.write("SDCD", 4);
  io::put<std::uint32_t>(os, 1);
  for (std::size_t v : {ds.num_samples, ds.T, std::size_t{2}, ds.nc, ds.nt}) io::put<std::uint32_t>(os, static_cast<std::uint32_t>(v));
  for (double v : ds.values) io::put<float>(os, static_cast<float>(v));
  io::put<double>(os, ds.norm.offset);
  io::put<double>(os, ds.norm.scale);
}

inline void write_dataset(const Dataset& ds, const std::string& path) {
  auto os = io::open_out(path);
  write_dataset(ds, os);
  if (!os) throw DataError("write failed for '" + path + "'");
}

inline Dataset read_dataset(std::istream& is) {
  io::expect_magic(is, "SDCD");
  const auto version = io::get<std::uint32_t>(is, "version");
  if (version != 1) throw DataError("unsupported dataset version " + std::to_string(version));
  Dataset ds;
  ds.num_samples = io::get<std::uint32_t>(is, "num_samples");
  ds.T = io::get<std::uint32_t>(is, "T");
  const auto two = io::get<std::uint32_t>(is, "channel count");
  ds.nc = io::get<std::uint32_t>(is, "N_c");
  ds.nt = io::get<std::uint32_t>(is, "N_t");
  if (two != 2) throw DataError("dataset channel axis must be 2, got " + std::to_string(two));
  if (ds.num_samples == 0 || ds.T == 0 || ds.nc == 0 || ds.nt == 0) throw DataError("dataset header has a zero extent");
  const std::size_t n = ds.num_samples * ds.sample_size();
  std::vector<float> raw(n);
  if (!is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n * sizeof(float))))
    throw DataError("truncated dataset payload");
  ds.values.assign(raw.begin(), raw.end());
  ds.norm.offset = io::get<double>(is, "offset");
  ds.norm.scale = io::get<double>(is, "scale");
  if (!(ds.norm.scale != 0.0)) throw DataError("dataset normalisation scale is zero");
  return ds;
}

inline Dataset read_dataset(const std::string& path) {
  auto is = io::open_in(path);
  return read_dataset(is);
}

}  // namespace sdcsi
