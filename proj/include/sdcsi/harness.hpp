// SPDX-License-Identifier: Apache-2.0
#pragma once

// Experiment plumbing: configuration, NMSE, training, evaluation, the
// four-arm ablation and result files.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "sdcsi/checkpoint.hpp"
#include "sdcsi/codec.hpp"
#include "sdcsi/dataset.hpp"
#include "sdcsi/optim.hpp"
#include "sdcsi/quantizer.hpp"

#ifndef SDCSI_SOURCE_REVISION
#define SDCSI_SOURCE_REVISION "unknown"
#endif

namespace sdcsi {

/// Floor used when a dB value is written to a file.
inline constexpr double kDbFloor = -300.0;

inline double to_db(double linear) { return 10.0 * std::log10(linear); }
inline double clamp_db(double db) { return std::isnan(db) ? db : std::max(db, kDbFloor); }

// ---------------------------------------------------------------------------
// Configuration

struct ExperimentConfig {
  // channel data
  std::size_t samples = 512;
  std::size_t T = 3;
  std::size_t nc = 8;
  std::size_t nt = 8;
  std::size_t ns = 64;
  double rho = 0.9;
  std::size_t paths = 6;
  std::size_t max_delay_tap = 4;
  double aod_range = std::numbers::pi / 6.0;
  double gain_decay = 1.0;
  std::uint64_t data_seed = 1000;
  // model
  double sigma = 0.25;
  Variant variant = Variant::Full;
  double quantile = 0.5;
  // training
  std::size_t epochs = 200;
  std::size_t batch_size = 4;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  std::size_t seeds = 3;
  double train_frac = 0.70;
  double val_frac = 0.15;
  int bits = 6;
  // paths
  std::string data;
  std::string checkpoint;
  std::string codebook;
  std::string out_dir = ".";

  CodecConfig codec(std::uint64_t model_seed) const {
    return CodecConfig{T, nc, nt, sigma, variant, quantile, model_seed};
  }

  MultipathParams channel() const {
    MultipathParams p;
    p.num_paths = paths;
    p.aod_range = aod_range;
    p.max_delay_tap = max_delay_tap;
    p.gain_decay = gain_decay;
    p.temporal_rho = rho;
    p.seed = data_seed;
    return p;
  }

  void validate() const {
    if (T == 0 || nc == 0 || nt == 0 || ns == 0) throw ConfigError("T, nc, nt and ns must be positive");
    if (nc > ns) throw ConfigError("nc must not exceed ns");
    if ((2 * nc * nt) % 2 != 0) throw ConfigError("frame length must be even for the pooling branch");
    if (!(sigma > 0.0 && sigma <= 1.0)) throw ConfigError("sigma must lie in (0, 1]");
    (void)codec(seed).codeword_length();
    if (!(quantile > 0.0 && quantile < 1.0)) throw ConfigError("sf.quantile must lie in (0, 1)");
    if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("rho must lie in [0, 1]");
    if (epochs == 0 || batch_size == 0 || seeds == 0) throw ConfigError("epochs, batch_size and seeds must be positive");
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (bits < 1 || bits > 16) throw ConfigError("bits must lie in [1, 16]");
    if (max_delay_tap == 0 || max_delay_tap > nc) throw ConfigError("max_delay_tap must lie in [1, nc]");
    if (train_frac <= 0.0 || val_frac <= 0.0 || train_frac + val_frac >= 1.0)
      throw ConfigError("split fractions must leave non-empty train, validation and test sets");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream is(value);
  T out{};
  if constexpr (std::is_unsigned_v<T>) {
    if (!value.empty() && value[0] == '-') throw ConfigError("value for '" + key + "' must be non-negative");
  }
  if (!(is >> out) || !(is >> std::ws).eof()) throw ConfigError("cannot parse '" + value + "' for key '" + key + "'");
  return out;
}

/// Accepts decimals or a fraction such as 1/8.
inline double parse_ratio(const std::string& key, const std::string& value) {
  const auto slash = value.find('/');
  if (slash == std::string::npos) return parse_number<double>(key, value);
  const double num = parse_number<double>(key, trim(value.substr(0, slash)));
  const double den = parse_number<double>(key, trim(value.substr(slash + 1)));
  if (den == 0.0) throw ConfigError("zero denominator for '" + key + "'");
  return num / den;
}

}  // namespace detail

/// Sets one configuration key. Unknown keys are configuration errors.
inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& raw) {
  using detail::parse_number;
  const std::string v = detail::trim(raw);
  if (key == "samples") c.samples = parse_number<std::size_t>(key, v);
  else if (key == "T") c.T = parse_number<std::size_t>(key, v);
  else if (key == "nc") c.nc = parse_number<std::size_t>(key, v);
  else if (key == "nt") c.nt = parse_number<std::size_t>(key, v);
  else if (key == "ns") c.ns = parse_number<std::size_t>(key, v);
  else if (key == "rho") c.rho = parse_number<double>(key, v);
  else if (key == "paths") c.paths = parse_number<std::size_t>(key, v);
  else if (key == "max_delay_tap") c.max_delay_tap = parse_number<std::size_t>(key, v);
  else if (key == "aod_range") c.aod_range = parse_number<double>(key, v);
  else if (key == "gain_decay") c.gain_decay = parse_number<double>(key, v);
  else if (key == "data_seed") c.data_seed = parse_number<std::uint64_t>(key, v);
  else if (key == "sigma") c.sigma = detail::parse_ratio(key, v);
  else if (key == "variant") c.variant = parse_variant(v);
  else if (key == "sf.quantile") c.quantile = parse_number<double>(key, v);
  else if (key == "epochs") c.epochs = parse_number<std::size_t>(key, v);
  else if (key == "batch_size") c.batch_size = parse_number<std::size_t>(key, v);
  else if (key == "lr") c.lr = parse_number<double>(key, v);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "seeds") c.seeds = parse_number<std::size_t>(key, v);
  else if (key == "train_frac") c.train_frac = parse_number<double>(key, v);
  else if (key == "val_frac") c.val_frac = parse_number<double>(key, v);
  else if (key == "bits") c.bits = parse_number<int>(key, v);
  else if (key == "data") c.data = v;
  else if (key == "checkpoint") c.checkpoint = v;
  else if (key == "codebook") c.codebook = v;
  else if (key == "out_dir") c.out_dir = v;
  else throw ConfigError("unknown configuration key '" + key + "'");
}

/// Flat `key = value` text; '#' starts a comment.
inline void apply_config_text(ExperimentConfig& c, std::istream& is) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    apply_setting(c, detail::trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  ExperimentConfig c;
  apply_config_text(c, is);
  return c;
}

/// Key/value echo of a configuration (the same keys the parser accepts).
inline std::map<std::string, std::string> config_echo(const ExperimentConfig& c) {
  auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  return {{"samples", std::to_string(c.samples)},   {"T", std::to_string(c.T)},
          {"nc", std::to_string(c.nc)},             {"nt", std::to_string(c.nt)},
          {"ns", std::to_string(c.ns)},             {"rho", num(c.rho)},
          {"paths", std::to_string(c.paths)},       {"max_delay_tap", std::to_string(c.max_delay_tap)},
          {"aod_range", num(c.aod_range)},          {"gain_decay", num(c.gain_decay)},
          {"data_seed", std::to_string(c.data_seed)}, {"sigma", num(c.sigma)},
          {"variant", to_string(c.variant)},        {"sf.quantile", num(c.quantile)},
          {"epochs", std::to_string(c.epochs)},     {"batch_size", std::to_string(c.batch_size)},
          {"lr", num(c.lr)},                        {"seed", std::to_string(c.seed)},
          {"seeds", std::to_string(c.seeds)},       {"train_frac", num(c.train_frac)},
          {"val_frac", num(c.val_frac)},            {"bits", std::to_string(c.bits)}};
}

// ---------------------------------------------------------------------------
// NMSE

struct NmseStats {
  double linear = std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  std::size_t excluded = 0;
  double db() const { return to_db(linear); }
};

/// Mean over samples of ||ref - est||^2 / ||ref||^2 on the values as given.
/// Rank-5 inputs are (B, ...) batches; anything else is one sample.
/// Zero-energy reference samples are skipped with a warning.
inline NmseStats nmse_stats(const Tensor& ref, const Tensor& est) {
  detail::require_same_shape(ref, est, "nmse");
  const std::size_t B = ref.rank() == 5 ? ref.dim(0) : 1;
  const std::size_t n = ref.numel() / B;
  NmseStats st;
  double acc = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = b * n; i < (b + 1) * n; ++i) {
      const double e = ref[i] - est[i];
      num += e * e;
      den += ref[i] * ref[i];
    }
    if (den == 0.0) {
      ++st.excluded;
      continue;
    }
    acc += num / den;
    ++st.used;
  }
  if (st.excluded) std::cerr << "warning: nmse skipped " << st.excluded << " zero-energy sample(s)\n";
  if (st.used) st.linear = acc / static_cast<double>(st.used);
  return st;
}

/// NMSE in dB between normalised tensors, computed after mapping both back
/// to the channel scale.
inline double nmse(const Tensor& hc, const Tensor& hc_hat, const NormRecord& norm) {
  return nmse_stats(remove_norm(hc, norm), remove_norm(hc_hat, norm)).db();
}

// ---------------------------------------------------------------------------
// Training and evaluation

struct MetricsReport {
  std::string variant;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_loss;    // per epoch
  std::size_t best_epoch = 0;
  std::size_t optimizer_steps = 0;
  double nmse_init_db = std::numeric_limits<double>::quiet_NaN();
  double nmse_db = std::numeric_limits<double>::quiet_NaN();
  double nmse_q_db = std::numeric_limits<double>::quiet_NaN();
  int bits = 0;
  std::size_t params_ue = 0, params_bs = 0, params_total = 0;
  double wall_seconds = 0.0;
  std::size_t threads = 1;
  std::map<std::string, std::string> config;
  std::string revision = SDCSI_SOURCE_REVISION;
};

struct TrainResult {
  CodecParams model;
  MetricsReport report;
};

namespace detail {

inline std::vector<std::vector<std::size_t>> chunks(const std::vector<std::size_t>& idx, std::size_t size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < idx.size(); i += size)
    out.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(i),
                     idx.begin() + static_cast<std::ptrdiff_t>(std::min(idx.size(), i + size)));
  return out;
}

inline Tensor as_batch5(Tensor x, const Dataset& ds) {
  if (x.rank() == 4) return reshape(x, {1, ds.T, 2, ds.nc, ds.nt});
  return x;
}

/// Index masks depend only on the input and the fixed mapping kernel, so
/// they are computed once per sample.
class MaskCache {
 public:
  MaskCache(const Dataset& ds, const SfParams& sf, bool enabled) {
    if (!enabled) return;
    masks_.reserve(ds.num_samples);
    for (std::size_t i = 0; i < ds.num_samples; ++i) masks_.push_back(compute_index_mask(ds.sample(i), sf));
  }
  Tensor batch(const std::vector<std::size_t>& idx) const {
    if (masks_.empty()) return Tensor{};
    std::vector<Tensor> parts;
    for (auto i : idx) parts.push_back(masks_[i]);
    NoGradGuard guard;
    return stack(parts, 0);
  }

 private:
  std::vector<Tensor> masks_;
};

inline void check_dims(const CodecConfig& cfg, const Dataset& ds) {
  if (cfg.T != ds.T || cfg.nc != ds.nc || cfg.nt != ds.nt)
    throw ConfigError("model expects (T,N_c,N_t) = (" + std::to_string(cfg.T) + "," + std::to_string(cfg.nc) + "," +
                      std::to_string(cfg.nt) + ") but data has (" + std::to_string(ds.T) + "," + std::to_string(ds.nc) +
                      "," + std::to_string(ds.nt) + ")");
}

}  // namespace detail

struct EvalResult {
  double nmse_db = std::numeric_limits<double>::quiet_NaN();
  double nmse_q_db = std::numeric_limits<double>::quiet_NaN();
  double mse = std::numeric_limits<double>::quiet_NaN();  // on normalised values
};

/// Inference-mode reconstruction of the listed samples, optionally through
/// the quantised feedback path.
inline EvalResult evaluate(CodecParams& model, const Dataset& ds, const std::vector<std::size_t>& indices,
                           const QuantizerCodebook* book = nullptr, std::size_t chunk = 64) {
  detail::check_dims(model.config, ds);
  if (indices.empty()) throw ConfigError("evaluate: empty split");
  NoGradGuard no_grad;
  const Variant v = model.config.variant;
  std::vector<Tensor> refs, outs, outs_q;
  for (const auto& part : detail::chunks(indices, chunk)) {
    const Tensor x = detail::as_batch5(ds.batch(part), ds);
    const Tensor c = compress(x, model, v);
    refs.push_back(x);
    outs.push_back(decode(c, model, Mode::Eval));
    if (book) outs_q.push_back(decode(dequantize(quantize(c, *book), *book), model, Mode::Eval));
  }
  auto join = [&](const std::vector<Tensor>& parts) {
    std::vector<double> all;
    for (const auto& t : parts) all.insert(all.end(), t.data().begin(), t.data().end());
    return Tensor({indices.size(), ds.T, 2, ds.nc, ds.nt}, std::move(all));
  };
  const Tensor ref = join(refs), out = join(outs);
  EvalResult r;
  r.nmse_db = nmse(ref, out, ds.norm);
  double s = 0.0;
  for (std::size_t i = 0; i < ref.numel(); ++i) s += (ref[i] - out[i]) * (ref[i] - out[i]);
  r.mse = s / static_cast<double>(ref.numel());
  if (book) r.nmse_q_db = nmse(ref, join(outs_q), ds.norm);
  return r;
}

/// Pools every codeword coordinate of the listed samples.
inline std::vector<double> collect_codewords(const CodecParams& model, const Dataset& ds,
                                             const std::vector<std::size_t>& indices, std::size_t chunk = 64) {
  NoGradGuard no_grad;
  std::vector<double> pool;
  for (const auto& part : detail::chunks(indices, chunk)) {
    const Tensor c = compress(detail::as_batch5(ds.batch(part), ds), model, model.config.variant);
    pool.insert(pool.end(), c.data().begin(), c.data().end());
  }
  return pool;
}

/// Minimises MSE(H_c, forward(H_c)) with Adam and keeps the parameters of
/// the epoch with the lowest validation loss. Deterministic for a fixed
/// configuration.
inline TrainResult train(const ExperimentConfig& cfg, const Dataset& ds, std::ostream* log = nullptr) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const CodecConfig ccfg = cfg.codec(cfg.seed);
  detail::check_dims(ccfg, ds);
  const Splits splits = make_splits(ds.num_samples, cfg.train_frac, cfg.val_frac);
  if (splits.train.size() < cfg.batch_size)
    throw ConfigError("training split (" + std::to_string(splits.train.size()) + ") smaller than batch size");

  CodecParams model = CodecParams::initialize(ccfg);
  const Variant v = ccfg.variant;
  MetricsReport rep;
  rep.variant = to_string(v);
  rep.sigma = cfg.sigma;
  rep.seed = cfg.seed;
  rep.bits = cfg.bits;
  rep.config = config_echo(cfg);
  rep.params_ue = parameter_count(model, v, Side::UE);
  rep.params_bs = parameter_count(model, v, Side::BS);
  rep.params_total = rep.params_ue + rep.params_bs;
  rep.nmse_init_db = evaluate(model, ds, splits.test).nmse_db;

  const detail::MaskCache masks(ds, model.sf, uses_sf(v));
  ParameterSet trainable = trainable_parameters(model, v);
  Adam adam(AdamOptions{cfg.lr});
  std::mt19937_64 shuffle_rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 17);

  CodecParams best = model.clone();
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order = splits.train;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (const auto& part : detail::chunks(order, cfg.batch_size)) {
      const Tensor x = detail::as_batch5(ds.batch(part), ds);
      const Tensor out = forward(x, model, v, Mode::Train, masks.batch(part));
      const Tensor loss = mse_loss(out, x);
      if (!std::isfinite(loss.item()))
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index) + " (lr " + std::to_string(cfg.lr) + ")");
      trainable.zero_grad();
      backward(loss);
      adam.step(trainable);
      epoch_loss += loss.item() * static_cast<double>(part.size());
      ++batch_index;
    }
    rep.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    const double val = evaluate(model, ds, splits.val).mse;
    rep.val_loss.push_back(val);
    if (val < best_val) {
      best_val = val;
      best = model.clone();
      rep.best_epoch = epoch;
    }
    if (log)
      *log << "[" << rep.variant << " seed " << cfg.seed << "] epoch " << epoch + 1 << "/" << cfg.epochs
           << " train " << rep.train_loss.back() << " val " << val << "\n";
  }
  rep.optimizer_steps = adam.steps();
  rep.nmse_db = evaluate(best, ds, splits.test).nmse_db;
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(best), std::move(rep)};
}

/// Codebook trained post hoc on the validation-split codeword pool.
inline QuantizerCodebook fit_quantizer(const CodecParams& model, const Dataset& ds, const ExperimentConfig& cfg) {
  const Splits splits = make_splits(ds.num_samples, cfg.train_frac, cfg.val_frac);
  const auto pool = collect_codewords(model, ds, splits.val);
  return train_lloyd_max(pool, cfg.bits, LloydMaxOptions{500, 1e-9});
}

/// Adds NMSE-Q on the test split to a training report.
inline QuantizerCodebook attach_quantized_metrics(TrainResult& run, const Dataset& ds, const ExperimentConfig& cfg) {
  const auto book = fit_quantizer(run.model, ds, cfg);
  const Splits splits = make_splits(ds.num_samples, cfg.train_frac, cfg.val_frac);
  const auto ev = evaluate(run.model, ds, splits.test, &book);
  run.report.nmse_db = ev.nmse_db;
  run.report.nmse_q_db = ev.nmse_q_db;
  return book;
}

/// Trains and evaluates all four arms for `cfg.seeds` consecutive seeds on
/// one shared dataset, each arm with the same epoch and batch budget.
inline std::vector<MetricsReport> ablate(const ExperimentConfig& cfg, const Dataset& ds, std::ostream* log = nullptr) {
  std::vector<MetricsReport> reports;
  for (std::size_t s = 0; s < cfg.seeds; ++s)
    for (Variant v : kAllVariants) {
      ExperimentConfig arm = cfg;
      arm.variant = v;
      arm.seed = cfg.seed + s;
      TrainResult run = train(arm, ds, log);
      attach_quantized_metrics(run, ds, arm);
      reports.push_back(std::move(run.report));
    }
  return reports;
}

// ---------------------------------------------------------------------------
// Reports

inline nlohmann::json to_json(const MetricsReport& r) {
  auto db = [](double v) -> nlohmann::json {
    if (std::isnan(v)) return nullptr;
    return clamp_db(v);
  };
  return {{"variant", r.variant},
          {"sigma", r.sigma},
          {"seed", r.seed},
          {"train_loss", r.train_loss},
          {"val_loss", r.val_loss},
          {"best_epoch", r.best_epoch},
          {"optimizer_steps", r.optimizer_steps},
          {"nmse_init_db", db(r.nmse_init_db)},
          {"nmse_db", db(r.nmse_db)},
          {"nmse_q_db", db(r.nmse_q_db)},
          {"bits", r.bits},
          {"params", {{"ue", r.params_ue}, {"bs", r.params_bs}, {"total", r.params_total}}},
          {"wall_seconds", r.wall_seconds},
          {"threads", r.threads},
          {"config", r.config},
          {"revision", r.revision}};
}

inline MetricsReport report_from_json(const nlohmann::json& j) {
  auto db = [](const nlohmann::json& v) {
    return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  };
  MetricsReport r;
  r.variant = j.at("variant").get<std::string>();
  r.sigma = j.at("sigma").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.train_loss = j.at("train_loss").get<std::vector<double>>();
  r.val_loss = j.at("val_loss").get<std::vector<double>>();
  r.best_epoch = j.at("best_epoch").get<std::size_t>();
  r.optimizer_steps = j.at("optimizer_steps").get<std::size_t>();
  r.nmse_init_db = db(j.at("nmse_init_db"));
  r.nmse_db = db(j.at("nmse_db"));
  r.nmse_q_db = db(j.at("nmse_q_db"));
  r.bits = j.at("bits").get<int>();
  r.params_ue = j.at("params").at("ue").get<std::size_t>();
  r.params_bs = j.at("params").at("bs").get<std::size_t>();
  r.params_total = j.at("params").at("total").get<std::size_t>();
  r.wall_seconds = j.at("wall_seconds").get<double>();
  r.threads = j.at("threads").get<std::size_t>();
  r.config = j.at("config").get<std::map<std::string, std::string>>();
  r.revision = j.at("revision").get<std::string>();
  return r;
}

inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string reports_csv(const std::vector<MetricsReport>& reports) {
  std::ostringstream os;
  os << "variant,sigma,seed,nmse_db,nmse_q_db,params_ue,params_bs\n";
  for (const auto& r : reports)
    os << r.variant << ',' << csv_number(r.sigma) << ',' << r.seed << ',' << csv_number(clamp_db(r.nmse_db)) << ','
       << csv_number(clamp_db(r.nmse_q_db)) << ',' << r.params_ue << ',' << r.params_bs << '\n';
  return os.str();
}

inline std::string reports_json(const std::vector<MetricsReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) arr.push_back(to_json(r));
  return nlohmann::json{{"reports", arr}}.dump(2) + "\n";
}

/// Writes results.json and results.csv into `dir`.
inline void report(const std::vector<MetricsReport>& reports, const std::string& dir) {
  std::filesystem::create_directories(dir);
  auto write = [](const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os || !(os << text)) throw DataError("cannot write '" + path.string() + "'");
  };
  write(std::filesystem::path(dir) / "results.json", reports_json(reports));
  write(std::filesystem::path(dir) / "results.csv", reports_csv(reports));
}

/// Mean test NMSE (dB) per variant, in kAllVariants order.
inline std::map<std::string, double> mean_nmse_by_variant(const std::vector<MetricsReport>& reports) {
  std::map<std::string, double> sum;
  std::map<std::string, std::size_t> count;
  for (const auto& r : reports) {
    sum[r.variant] += r.nmse_db;
    ++count[r.variant];
  }
  for (auto& [k, v] : sum) v /= static_cast<double>(count[k]);
  return sum;
}

}  // namespace sdcsi
