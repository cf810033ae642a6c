// SPDX-License-Identifier: Apache-2.0
#pragma once

// Model checkpoint container.
//
// Layout (little-endian):
//   char[4] "SDCK", u32 version = 1
//   config: f64 sigma, u32 T, u32 N_c, u32 N_t, u32 variant, f64 quantile
//   u32 record count, then per record:
//     u8 trainable, u32 name length, name bytes, u32 rank, u32 extents[rank],
//     f32 payload
// Trainable records come first in parameter order, followed by the
// non-trainable mapping kernel and batch-norm running statistics.

#include <cstdint>
#include <string>

#include "sdcsi/codec.hpp"
#include "sdcsi/dataset.hpp"

namespace sdcsi {

namespace detail {

inline void put_record(std::ostream& os, bool trainable, const std::string& name, const Shape& shape,
                       std::span<const double> values) {
  io::put<std::uint8_t>(os, trainable ? 1 : 0);
  io::put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  io::put<std::uint32_t>(os, static_cast<std::uint32_t>(shape.size()));
  for (auto e : shape) io::put<std::uint32_t>(os, static_cast<std::uint32_t>(e));
  for (double v : values) io::put<float>(os, static_cast<float>(v));
}

struct Record {
  bool trainable = false;
  std::string name;
  Shape shape;
  std::vector<double> values;
};

inline Record get_record(std::istream& is) {
  Record r;
  r.trainable = io::get<std::uint8_t>(is, "record flag") != 0;
  const auto len = io::get<std::uint32_t>(is, "name length");
  if (len > 4096) throw DataError("checkpoint record name too long");
  r.name.resize(len);
  if (!is.read(r.name.data(), len)) throw DataError("truncated record name");
  const auto rank = io::get<std::uint32_t>(is, "rank");
  if (rank == 0 || rank > 8) throw DataError("checkpoint record '" + r.name + "' has invalid rank");
  for (std::uint32_t i = 0; i < rank; ++i) r.shape.push_back(io::get<std::uint32_t>(is, "extent"));
  r.values.resize(numel_of(r.shape));
  for (auto& v : r.values) v = io::get<float>(is, "payload");
  return r;
}

inline void assign(Tensor& dst, const Record& r) {
  if (dst.shape() != r.shape)
    throw ConfigError("checkpoint record '" + r.name + "' has shape " + shape_str(r.shape) + ", model expects " +
                      shape_str(dst.shape()));
  std::copy(r.values.begin(), r.values.end(), dst.mutable_data().begin());
}

}  // namespace detail

inline void write_checkpoint(const CodecParams& p, std::ostream& os) {
  const auto& cfg = p.config;
  os.write("SDCK", 4);
  io::put<std::uint32_t>(os, 1);
  io::put<double>(os, cfg.sigma);
  io::put<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.T));
  io::put<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.nc));
  io::put<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.nt));
  io::put<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.variant));
  io::put<double>(os, cfg.quantile);
  io::put<std::uint32_t>(os, static_cast<std::uint32_t>(p.params.size() + 1 + 2 * p.bn.size()));
  for (const auto& [name, t] : p.params) detail::put_record(os, true, name, t.shape(), t.data());
  detail::put_record(os, false, "sf.mapping", p.sf.mapping_kernel.shape(), p.sf.mapping_kernel.data());
  for (std::size_t l = 0; l < p.bn.size(); ++l) {
    const auto& st = p.bn[l];
    detail::put_record(os, false, CodecParams::bn_name(l) + ".running_mean", {st.running_mean.size()}, st.running_mean);
    detail::put_record(os, false, CodecParams::bn_name(l) + ".running_var", {st.running_var.size()}, st.running_var);
  }
}

inline void write_checkpoint(const CodecParams& p, const std::string& path) {
  auto os = io::open_out(path);
  write_checkpoint(p, os);
  if (!os) throw DataError("write failed for '" + path + "'");
}

inline CodecParams read_checkpoint(std::istream& is) {
  io::expect_magic(is, "SDCK");
  const auto version = io::get<std::uint32_t>(is, "version");
  if (version != 1) throw DataError("unsupported checkpoint version " + std::to_string(version));
  CodecConfig cfg;
  cfg.sigma = io::get<double>(is, "sigma");
  cfg.T = io::get<std::uint32_t>(is, "T");
  cfg.nc = io::get<std::uint32_t>(is, "N_c");
  cfg.nt = io::get<std::uint32_t>(is, "N_t");
  const auto variant = io::get<std::uint32_t>(is, "variant");
  if (variant > 3) throw DataError("checkpoint variant out of range");
  cfg.variant = static_cast<Variant>(variant);
  cfg.quantile = io::get<double>(is, "quantile");

  CodecParams p = CodecParams::initialize(cfg);
  const auto count = io::get<std::uint32_t>(is, "record count");
  std::size_t seen_trainable = 0;
  bool seen_mapping = false;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto r = detail::get_record(is);
    if (r.trainable) {
      if (!p.params.contains(r.name)) throw DataError("checkpoint has unknown parameter '" + r.name + "'");
      detail::assign(p.params.get(r.name), r);
      ++seen_trainable;
    } else if (r.name == "sf.mapping") {
      detail::assign(p.sf.mapping_kernel, r);
      seen_mapping = true;
    } else {
      bool matched = false;
      for (std::size_t l = 0; l < p.bn.size() && !matched; ++l) {
        const std::string base = CodecParams::bn_name(l);
        auto& st = p.bn[l];
        for (auto [suffix, vec] : {std::pair{".running_mean", &st.running_mean}, std::pair{".running_var", &st.running_var}}) {
          if (r.name != base + suffix) continue;
          if (r.values.size() != vec->size()) throw ConfigError("checkpoint record '" + r.name + "' has wrong length");
          *vec = r.values;
          matched = true;
        }
      }
      if (!matched) throw DataError("checkpoint has unknown record '" + r.name + "'");
    }
  }
  if (seen_trainable != p.params.size() || !seen_mapping) throw DataError("checkpoint is missing parameter records");
  return p;
}

inline CodecParams read_checkpoint(const std::string& path) {
  auto is = io::open_in(path);
  return read_checkpoint(is);
}

}  // namespace sdcsi
