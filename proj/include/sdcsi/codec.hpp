// SPDX-License-Identifier: Apache-2.0
#pragma once

// Feature-coupling encoder and feature-decoupling decoder.
//
// Encoder, per frame t of H_e (T, 2, N_c, N_t) flattened to V (T, 2 N_c N_t):
//   spatial   S_t = W_s V_t + b_s                          (T, M)
//   temporal  Q   = LSTM(maxpool_2(V))                     (T, M)
//   codeword  c   = S + Q                                  (T, M)
// Decoder: dense M -> 2 N_c N_t per frame, reshape to (2, T, N_c, N_t) and
// six 1 x k x k 3D convolutions with batch norm; the last ends in a sigmoid.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "sdcsi/layers.hpp"
#include "sdcsi/self_info.hpp"

namespace sdcsi {

enum class Variant { Baseline, PlusLstm, PlusSf, Full };

inline constexpr std::array<Variant, 4> kAllVariants{Variant::Baseline, Variant::PlusLstm, Variant::PlusSf, Variant::Full};

inline bool uses_lstm(Variant v) { return v == Variant::PlusLstm || v == Variant::Full; }
inline bool uses_sf(Variant v) { return v == Variant::PlusSf || v == Variant::Full; }

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::Baseline: return "baseline";
    case Variant::PlusLstm: return "lstm";
    case Variant::PlusSf: return "sf";
    case Variant::Full: return "full";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  for (auto v : kAllVariants)
    if (to_string(v) == s) return v;
  throw ConfigError("unknown variant '" + s + "' (expected baseline, lstm, sf or full)");
}

struct CodecConfig {
  std::size_t T = 3;
  std::size_t nc = 8;
  std::size_t nt = 8;
  double sigma = 0.25;
  Variant variant = Variant::Full;
  double quantile = 0.5;
  std::uint64_t seed = 1;

  std::size_t frame_size() const { return 2 * nc * nt; }
  /// M = round(sigma * 2 N_c N_t).
  std::size_t codeword_length() const {
    const double m = std::round(sigma * static_cast<double>(frame_size()));
    if (!(m >= 1.0)) throw ConfigError("compression ratio " + std::to_string(sigma) + " gives codeword length < 1");
    return static_cast<std::size_t>(m);
  }
};

struct DecoderLayerSpec {
  std::size_t filters;
  std::size_t kernel;
  std::size_t padding;
};

// Table of the six recovery convolutions (filters / kernel 1 x k x k /
// padding). Layer 5 uses padding 0 so the 1x1 kernel keeps the frame size.
inline constexpr std::array<DecoderLayerSpec, 6> kDecoderLayers{{
    {2, 7, 3},
    {4, 5, 2},
    {8, 5, 2},
    {8, 3, 1},
    {2, 1, 0},
    {2, 3, 1},
}};

/// Initial gamma of the batch norm feeding the sigmoid. Unit gamma drives
/// the dominant angular-delay bins into the flat tails of the sigmoid.
inline constexpr double kOutputBnGammaInit = 0.1;

struct CodecParams {
  CodecConfig config;
  ParameterSet params;  // every trainable tensor, SF kernels included
  SfParams sf;          // extract/restore alias entries of `params`
  std::array<BatchNormState, kDecoderLayers.size()> bn;

  static std::string conv_name(std::size_t layer) { return "dec.conv" + std::to_string(layer + 1); }
  static std::string bn_name(std::size_t layer) { return "dec.bn" + std::to_string(layer + 1); }

  /// Seeded initialisation. Every variant draws the same parameters in the
  /// same order, so ablation arms sharing a seed share initial weights.
  static CodecParams initialize(const CodecConfig& cfg) {
    CodecParams p;
    p.config = cfg;
    const std::size_t F = cfg.frame_size(), M = cfg.codeword_length(), P = cfg.nc * cfg.nt;
    std::mt19937_64 rng(cfg.seed);
    p.sf = SfParams::initialize(rng, cfg.quantile);
    p.params.add("sf.extract", p.sf.extract_kernel);
    p.params.add("sf.restore", p.sf.restore_kernel);
    p.params.add("enc.spatial.weight", fan_in_uniform({M, F}, F, rng));
    p.params.add("enc.spatial.bias", Tensor::zeros({M}));
    p.params.add("enc.lstm.weight", fan_in_uniform({P + M, 4 * M}, P + M, rng));
    p.params.add("enc.lstm.bias", Tensor::zeros({4 * M}));
    p.params.add("dec.fc.weight", fan_in_uniform({F, M}, M, rng));
    p.params.add("dec.fc.bias", Tensor::zeros({F}));
    std::size_t cin = 2;
    for (std::size_t l = 0; l < kDecoderLayers.size(); ++l) {
      const auto& spec = kDecoderLayers[l];
      p.params.add(conv_name(l) + ".kernel",
                   fan_in_uniform({spec.filters, cin, 1, spec.kernel, spec.kernel}, cin * spec.kernel * spec.kernel, rng));
      p.params.add(conv_name(l) + ".bias", Tensor::zeros({spec.filters}));
      const bool last = l + 1 == kDecoderLayers.size();
      p.params.add(bn_name(l) + ".gamma", Tensor::full({spec.filters}, last ? kOutputBnGammaInit : 1.0));
      p.params.add(bn_name(l) + ".beta", Tensor::zeros({spec.filters}));
      p.bn[l] = BatchNormState(spec.filters);
      cin = spec.filters;
    }
    return p;
  }

  /// Deep copy with the SF aliases re-bound to the copied tensors.
  CodecParams clone() const {
    CodecParams out;
    out.config = config;
    out.params = params.clone();
    out.sf = sf;
    out.sf.extract_kernel = out.params.get("sf.extract");
    out.sf.restore_kernel = out.params.get("sf.restore");
    out.sf.mapping_kernel = sf.mapping_kernel.clone();
    out.bn = bn;
    return out;
  }
};

enum class Side { UE, BS, Total };

inline bool is_encoder_side(const std::string& name) { return name.rfind("sf.", 0) == 0 || name.rfind("enc.", 0) == 0; }

inline bool used_by(const std::string& name, Variant v) {
  if (name.rfind("sf.", 0) == 0) return uses_sf(v);
  if (name.rfind("enc.lstm.", 0) == 0) return uses_lstm(v);
  return true;
}

/// Handles onto the parameters a variant actually trains.
inline ParameterSet trainable_parameters(const CodecParams& p, Variant v) {
  ParameterSet out;
  for (const auto& [name, t] : p.params)
    if (used_by(name, v)) out.add(name, t);
  return out;
}

/// Trainable scalar count; UE = SF module + encoder, BS = decoder.
inline std::size_t parameter_count(const CodecParams& p, Variant v, Side side) {
  std::size_t n = 0;
  for (const auto& [name, t] : p.params) {
    if (!used_by(name, v)) continue;
    const bool ue = is_encoder_side(name);
    if (side == Side::Total || (side == Side::UE) == ue) n += t.numel();
  }
  return n;
}

namespace detail {

inline Tensor as_batch(const Tensor& x, std::size_t rank) {
  if (x.rank() == rank) return x;
  Shape s = x.shape();
  s.insert(s.begin(), 1);
  return reshape(x, s);
}

inline Tensor drop_batch(const Tensor& x) {
  Shape s(x.shape().begin() + 1, x.shape().end());
  return reshape(x, s);
}

// (B, T, 2, N_c, N_t) -> (B, T, M).
inline Tensor encode_batch(const Tensor& he, const CodecParams& p, Variant v) {
  const auto& cfg = p.config;
  if (he.rank() != 5 || he.dim(2) != 2 || he.dim(3) != cfg.nc || he.dim(4) != cfg.nt)
    throw DimensionError("encode: input " + shape_str(he.shape()) + " does not match (T,2," + std::to_string(cfg.nc) + "," +
                         std::to_string(cfg.nt) + ")");
  const std::size_t B = he.dim(0), T = he.dim(1), M = cfg.codeword_length();
  const Tensor V = reshape(he, {B, T, cfg.frame_size()});
  const Tensor S = conv1d_dense(V, p.params.get("enc.spatial.weight"), p.params.get("enc.spatial.bias"));
  if (!uses_lstm(v)) return S;
  const Tensor pooled = maxpool_lastaxis(V, 2, 2);
  const Tensor Q = lstm_forward(pooled, p.params, M, "enc.lstm.");
  return add(S, Q);
}

// (B, T, M) -> (B, T, 2, N_c, N_t).
inline Tensor decode_batch(const Tensor& c, CodecParams& p, Mode mode) {
  const auto& cfg = p.config;
  const std::size_t M = cfg.codeword_length();
  if (c.rank() != 3 || c.dim(2) != M)
    throw DimensionError("decode: codeword " + shape_str(c.shape()) + " expected last axis M = " + std::to_string(M) +
                         " (spatial decompression layer)");
  const std::size_t B = c.dim(0), T = c.dim(1);
  const Tensor W = conv1d_dense(c, p.params.get("dec.fc.weight"), p.params.get("dec.fc.bias"));
  Tensor x = permute(reshape(W, {B, T, 2, cfg.nc, cfg.nt}), {0, 2, 1, 3, 4});
  for (std::size_t l = 0; l < kDecoderLayers.size(); ++l) {
    const auto& spec = kDecoderLayers[l];
    const std::string conv = CodecParams::conv_name(l), bn = CodecParams::bn_name(l);
    const Tensor& kernel = p.params.get(conv + ".kernel");
    if (kernel.dim(1) != x.dim(1))
      throw DimensionError("decode: layer " + std::to_string(l + 1) + " expects " + std::to_string(kernel.dim(1)) +
                           " input channels, got " + std::to_string(x.dim(1)));
    x = conv3d(x, kernel, p.params.get(conv + ".bias"), {1, 1, 1}, {0, spec.padding, spec.padding});
    if (x.dim(3) != cfg.nc || x.dim(4) != cfg.nt)
      throw DimensionError("decode: layer " + std::to_string(l + 1) + " changed the frame size to " + shape_str(x.shape()));
    x = batchnorm(x, 1, p.params.get(bn + ".gamma"), p.params.get(bn + ".beta"), p.bn[l], mode);
    x = l + 1 == kDecoderLayers.size() ? sigmoid(x) : lrelu(x, 0.3);
  }
  return permute(x, {0, 2, 1, 3, 4});
}

}  // namespace detail

/// Codeword (T, M) from H_e (T, 2, N_c, N_t); batched inputs gain a
/// leading axis on both sides.
inline Tensor encode(const Tensor& he, const CodecParams& p, Variant v) {
  const Tensor c = detail::encode_batch(detail::as_batch(he, 5), p, v);
  return he.rank() == 5 ? c : detail::drop_batch(c);
}

/// Recovered H_c in (0, 1) from a codeword (T, M) or (B, T, M). Train mode
/// updates the batch-norm running statistics.
inline Tensor decode(const Tensor& c, CodecParams& p, Mode mode = Mode::Eval) {
  const Tensor out = detail::decode_batch(detail::as_batch(c, 3), p, mode);
  return c.rank() == 3 ? out : detail::drop_batch(out);
}

/// UE side: H_c -> SF transform (variants with SF) -> codeword. `mask` may
/// carry a precomputed index mask (B, T, 64, N_c, N_t) or (T, 64, N_c, N_t).
inline Tensor compress(const Tensor& hc, const CodecParams& p, Variant v, const Tensor& mask = Tensor{}) {
  const Tensor x = detail::as_batch(hc, 5);
  Tensor he = x;
  if (uses_sf(v)) {
    const Tensor m = mask.defined() ? detail::as_batch(mask, 5) : compute_index_mask_batch(x, p.sf);
    he = sf_forward(x, p.sf, m);
  }
  const Tensor c = detail::encode_batch(he, p, v);
  return hc.rank() == 5 ? c : detail::drop_batch(c);
}

/// Full pipeline H_c -> codeword -> recovered H_c.
inline Tensor forward(const Tensor& hc, CodecParams& p, Variant v, Mode mode = Mode::Eval, const Tensor& mask = Tensor{}) {
  return decode(compress(hc, p, v, mask), p, mode);
}

}  // namespace sdcsi
