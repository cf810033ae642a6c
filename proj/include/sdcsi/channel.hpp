// SPDX-License-Identifier: Apache-2.0
#pragma once

// Synthetic sparse multipath channels and the spatial-frequency <->
// angular-delay transform pair.
//
// A frame is an N_s x N_t complex matrix (subcarriers x ULA antennas):
//
//   H[s, n] = sum_p g_p(t) * exp(+j 2 pi s tau_p / N_s) * exp(-j pi n sin(theta_p))
//
// With integer delay taps tau_p, the unitary DFT along the subcarrier axis
// puts path p exactly on delay row tau_p, so keeping the first N_c rows is
// lossless whenever every tap is below N_c. Path gains follow a first-order
// Gauss-Markov process across frames.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "sdcsi/tensor.hpp"

namespace sdcsi {

using cdouble = std::complex<double>;

struct ComplexMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<cdouble> data;  // row-major

  ComplexMatrix() = default;
  ComplexMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}
  cdouble& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const cdouble& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  double frobenius_norm() const {
    double s = 0.0;
    for (const auto& v : data) s += std::norm(v);
    return std::sqrt(s);
  }
};

struct MultipathParams {
  std::size_t num_paths = 6;
  /// Departure angles are drawn uniformly from [-aod_range, aod_range].
  double aod_range = std::numbers::pi / 6.0;
  /// Explicit per-path delay taps. When empty, path 0 sits on tap 0 and the
  /// rest are drawn uniformly from [0, max_delay_tap).
  std::vector<std::size_t> delay_taps;
  std::size_t max_delay_tap = 4;
  /// Explicit per-path gain variances. When empty, exp(-p / gain_decay)
  /// normalised to unit total power.
  std::vector<double> gain_profile;
  double gain_decay = 1.0;
  double temporal_rho = 0.9;
  std::uint64_t seed = 0;
};

/// T frames of shape (N_s, N_t).
struct RawChannelSequence {
  std::vector<ComplexMatrix> frames;

  std::size_t num_frames() const { return frames.size(); }
  std::size_t subcarriers() const { return frames.empty() ? 0 : frames.front().rows; }
  std::size_t antennas() const { return frames.empty() ? 0 : frames.front().cols; }
};

/// normalized = offset + scale * raw.
struct NormRecord {
  double offset = 0.5;
  double scale = 1.0;

  double normalize(double raw) const { return offset + scale * raw; }
  double denormalize(double v) const { return (v - offset) / scale; }

  /// Symmetric map sending [-max_abs, max_abs] onto [0, 1] with 0 -> 0.5.
  static NormRecord symmetric(double max_abs) { return {0.5, max_abs > 0.0 ? 0.5 / max_abs : 1.0}; }
};

/// Real tensor (T, 2, N_c, N_t) in [0, 1]; channel 0 real, channel 1 imaginary.
struct AngularDelayCsi {
  Tensor values;
  std::optional<NormRecord> norm;
};

inline std::vector<double> resolve_gain_profile(const MultipathParams& p) {
  if (!p.gain_profile.empty()) {
    if (p.gain_profile.size() != p.num_paths)
      throw ConfigError("gain_profile has " + std::to_string(p.gain_profile.size()) + " entries for " +
                        std::to_string(p.num_paths) + " paths");
    return p.gain_profile;
  }
  std::vector<double> var(p.num_paths);
  double total = 0.0;
  for (std::size_t i = 0; i < p.num_paths; ++i) total += var[i] = std::exp(-static_cast<double>(i) / p.gain_decay);
  for (auto& v : var) v /= total;
  return var;
}

inline RawChannelSequence generate_sequence(const MultipathParams& params, std::size_t T, std::size_t n_s,
                                            std::size_t n_t) {
  if (params.num_paths == 0) throw ConfigError("multipath generator needs at least one path");
  if (T == 0 || n_s == 0 || n_t == 0) throw ConfigError("generate_sequence: T, N_s and N_t must be positive");
  if (params.temporal_rho < 0.0 || params.temporal_rho > 1.0)
    throw ConfigError("temporal_rho must lie in [0, 1]");
  if (!params.delay_taps.empty() && params.delay_taps.size() != params.num_paths)
    throw ConfigError("delay_taps has " + std::to_string(params.delay_taps.size()) + " entries for " +
                      std::to_string(params.num_paths) + " paths");
  if (params.delay_taps.empty() && params.max_delay_tap == 0) throw ConfigError("max_delay_tap must be positive");

  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> angle(-params.aod_range, params.aod_range);

  const std::size_t P = params.num_paths;
  std::vector<std::size_t> taps = params.delay_taps;
  if (taps.empty()) {
    std::uniform_int_distribution<std::size_t> tap(0, params.max_delay_tap - 1);
    taps.push_back(0);
    for (std::size_t p = 1; p < P; ++p) taps.push_back(tap(rng));
  }
  std::vector<double> aod(P);
  for (auto& a : aod) a = angle(rng);
  const auto var = resolve_gain_profile(params);

  auto draw = [&](std::size_t p) {
    const double s = std::sqrt(var[p] / 2.0);
    const double re = normal(rng);
    const double im = normal(rng);
    return cdouble(s * re, s * im);
  };

  // Per-path signatures are fixed over the sequence.
  constexpr double pi = std::numbers::pi;
  std::vector<std::vector<cdouble>> freq(P, std::vector<cdouble>(n_s));
  std::vector<std::vector<cdouble>> steer(P, std::vector<cdouble>(n_t));
  for (std::size_t p = 0; p < P; ++p) {
    for (std::size_t s = 0; s < n_s; ++s)
      freq[p][s] = std::polar(1.0, 2.0 * pi * static_cast<double>(s * taps[p] % n_s) / static_cast<double>(n_s));
    for (std::size_t n = 0; n < n_t; ++n) steer[p][n] = std::polar(1.0, -pi * static_cast<double>(n) * std::sin(aod[p]));
  }

  std::vector<cdouble> gains(P);
  for (std::size_t p = 0; p < P; ++p) gains[p] = draw(p);
  const double rho = params.temporal_rho;
  const double innov = std::sqrt(1.0 - rho * rho);

  RawChannelSequence seq;
  seq.frames.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    if (t > 0)
      for (std::size_t p = 0; p < P; ++p) {
        const cdouble w = draw(p);
        gains[p] = rho * gains[p] + innov * w;
      }
    ComplexMatrix H(n_s, n_t);
    for (std::size_t p = 0; p < P; ++p)
      for (std::size_t s = 0; s < n_s; ++s) {
        const cdouble a = gains[p] * freq[p][s];
        for (std::size_t n = 0; n < n_t; ++n) H(s, n) += a * steer[p][n];
      }
    seq.frames.push_back(std::move(H));
  }
  return seq;
}

/// F[k, m] = exp(-j 2 pi k m / N) / sqrt(N).
inline ComplexMatrix unitary_dft_matrix(std::size_t n) {
  ComplexMatrix F(n, n);
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t m = 0; m < n; ++m)
      F(k, m) = std::polar(norm, -2.0 * std::numbers::pi * static_cast<double>(k * m % n) / static_cast<double>(n));
  return F;
}

inline ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.cols != b.rows) throw DimensionError("complex matmul: inner extents differ");
  ComplexMatrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k) {
      const cdouble s = a(i, k);
      for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += s * b(k, j);
    }
  return c;
}

inline ComplexMatrix conj_transpose(const ComplexMatrix& a) {
  ComplexMatrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = std::conj(a(i, j));
  return t;
}

/// Full angular-delay matrix F_c * H * F_d (no truncation).
inline ComplexMatrix angular_delay_full(const ComplexMatrix& H) {
  return matmul(matmul(unitary_dft_matrix(H.rows), H), unitary_dft_matrix(H.cols));
}

/// Un-normalised truncated transform, real tensor (T, 2, N_c, N_t).
inline Tensor angular_delay_values(const RawChannelSequence& raw, std::size_t n_c) {
  if (raw.frames.empty()) throw DimensionError("to_angular_delay: empty sequence");
  const std::size_t n_s = raw.subcarriers(), n_t = raw.antennas(), T = raw.num_frames();
  if (n_c == 0 || n_c > n_s)
    throw DimensionError("to_angular_delay: N_c = " + std::to_string(n_c) + " must lie in [1, N_s = " +
                         std::to_string(n_s) + "]");
  // Only the first N_c rows of F_c are needed.
  ComplexMatrix Fc(n_c, n_s);
  const ComplexMatrix full = unitary_dft_matrix(n_s);
  for (std::size_t k = 0; k < n_c; ++k)
    for (std::size_t m = 0; m < n_s; ++m) Fc(k, m) = full(k, m);
  const ComplexMatrix Fd = unitary_dft_matrix(n_t);

  std::vector<double> out(T * 2 * n_c * n_t);
  for (std::size_t t = 0; t < T; ++t) {
    const auto& H = raw.frames[t];
    if (H.rows != n_s || H.cols != n_t) throw DimensionError("to_angular_delay: frames differ in shape");
    const ComplexMatrix Hf = matmul(matmul(Fc, H), Fd);
    for (std::size_t r = 0; r < n_c; ++r)
      for (std::size_t c = 0; c < n_t; ++c) {
        out[((t * 2 + 0) * n_c + r) * n_t + c] = Hf(r, c).real();
        out[((t * 2 + 1) * n_c + r) * n_t + c] = Hf(r, c).imag();
      }
  }
  return Tensor({T, 2, n_c, n_t}, std::move(out));
}

inline double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline Tensor apply_norm(const Tensor& raw_values, const NormRecord& norm) {
  std::vector<double> v(raw_values.data().begin(), raw_values.data().end());
  for (auto& x : v) x = norm.normalize(x);
  return Tensor(raw_values.shape(), std::move(v));
}

inline Tensor remove_norm(const Tensor& values, const NormRecord& norm) {
  std::vector<double> v(values.data().begin(), values.data().end());
  for (auto& x : v) x = norm.denormalize(x);
  return Tensor(values.shape(), std::move(v));
}

/// Angular-delay transform, truncation to N_c rows, real/imag split, and
/// normalisation with a caller-supplied (dataset-wide) record.
inline AngularDelayCsi to_angular_delay(const RawChannelSequence& raw, std::size_t n_c, const NormRecord& norm) {
  return {apply_norm(angular_delay_values(raw, n_c), norm), norm};
}

/// As above, normalising this sequence on its own symmetric range.
inline AngularDelayCsi to_angular_delay(const RawChannelSequence& raw, std::size_t n_c) {
  Tensor v = angular_delay_values(raw, n_c);
  const NormRecord norm = NormRecord::symmetric(max_abs(v.data()));
  return {apply_norm(v, norm), norm};
}

/// Denormalise, zero-fill delay rows N_c..N_s-1 and invert both DFTs.
inline RawChannelSequence from_angular_delay(const AngularDelayCsi& csi, std::size_t n_s) {
  if (!csi.norm) throw UsageError("from_angular_delay: CSI carries no normalisation record");
  const Tensor& v = csi.values;
  if (v.rank() != 4 || v.dim(1) != 2) throw DimensionError("from_angular_delay: expected (T,2,N_c,N_t), got " + shape_str(v.shape()));
  const std::size_t T = v.dim(0), n_c = v.dim(2), n_t = v.dim(3);
  if (n_c > n_s) throw DimensionError("from_angular_delay: N_c exceeds N_s");
  const ComplexMatrix Fc = unitary_dft_matrix(n_s);
  const ComplexMatrix FdH = conj_transpose(unitary_dft_matrix(n_t));
  const NormRecord& norm = *csi.norm;

  RawChannelSequence out;
  for (std::size_t t = 0; t < T; ++t) {
    ComplexMatrix Hf(n_c, n_t);
    for (std::size_t r = 0; r < n_c; ++r)
      for (std::size_t c = 0; c < n_t; ++c)
        Hf(r, c) = {norm.denormalize(v[((t * 2 + 0) * n_c + r) * n_t + c]),
                    norm.denormalize(v[((t * 2 + 1) * n_c + r) * n_t + c])};
    const ComplexMatrix G = matmul(Hf, FdH);  // (N_c, N_t)
    // H = F_c^H [G; 0]: only the first N_c columns of F_c^H contribute.
    ComplexMatrix H(n_s, n_t);
    for (std::size_t s = 0; s < n_s; ++s)
      for (std::size_t k = 0; k < n_c; ++k) {
        const cdouble f = std::conj(Fc(k, s));
        for (std::size_t c = 0; c < n_t; ++c) H(s, c) += f * G(k, c);
      }
    out.frames.push_back(std::move(H));
  }
  return out;
}

}  // namespace sdcsi
