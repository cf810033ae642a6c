// SPDX-License-Identifier: Apache-2.0
// Command-line front end: gen-data, train, eval, quantize, ablate.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "sdcsi/sdcsi.hpp"

namespace fs = std::filesystem;
using namespace sdcsi;

namespace {

// Options shared by every subcommand; unset overrides leave the config alone.
struct CommonOptions {
  std::string config;
  std::optional<std::string> sigma, variant, out_dir, data;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  bool quiet = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "flat key = value configuration file");
    app->add_option("--sigma", sigma, "compression ratio, e.g. 0.25 or 1/8");
    app->add_option("--seed", seed, "model and shuffling seed");
    app->add_option("--epochs", epochs, "training epochs");
    app->add_option("--variant", variant, "baseline | lstm | sf | full");
    app->add_option("--out-dir", out_dir, "directory for results");
    app->add_option("--data", data, "dataset file (generated from the config when absent)");
    app->add_flag("--quiet", quiet, "suppress per-epoch logging");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig c = config.empty() ? ExperimentConfig{} : load_config(config);
    if (sigma) apply_setting(c, "sigma", *sigma);
    if (variant) apply_setting(c, "variant", *variant);
    if (seed) c.seed = *seed;
    if (epochs) c.epochs = *epochs;
    if (out_dir) c.out_dir = *out_dir;
    if (data) c.data = *data;
    return c;
  }
};

Dataset load_or_generate(const ExperimentConfig& c) {
  if (!c.data.empty()) return read_dataset(c.data);
  return make_dataset(c.channel(), c.samples, c.T, c.ns, c.nt, c.nc);
}

fs::path out_path(const ExperimentConfig& c, const std::string& name) {
  fs::create_directories(c.out_dir);
  return fs::path(c.out_dir) / name;
}

void print_summary(const MetricsReport& r) {
  std::cout << r.variant << " sigma=" << r.sigma << " seed=" << r.seed << " nmse_db=" << r.nmse_db
            << " nmse_q_db=" << r.nmse_q_db << " params_ue=" << r.params_ue << " params_bs=" << r.params_bs << "\n";
}

int run(int argc, char** argv) {
  CLI::App app{"Sequential CSI compression with self-information preprocessing"};
  app.require_subcommand(1);

  CommonOptions gen_opts, train_opts, eval_opts, quant_opts, ablate_opts;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic angular-delay CSI dataset");
  gen_opts.attach(gen);
  std::optional<std::size_t> samples, T, nc, nt, ns;
  std::optional<double> rho;
  std::string gen_out = "data.sdcd";
  gen->add_option("--samples", samples, "number of sequences");
  gen->add_option("--T", T, "frames per sequence");
  gen->add_option("--nc", nc, "delay rows kept");
  gen->add_option("--nt", nt, "antennas");
  gen->add_option("--ns", ns, "subcarriers");
  gen->add_option("--rho", rho, "frame-to-frame gain correlation");
  gen->add_option("--out", gen_out, "output dataset file");

  auto* tr = app.add_subcommand("train", "train one model and write a checkpoint");
  train_opts.attach(tr);

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  eval_opts.attach(ev);
  std::string eval_ckpt, eval_book;
  ev->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
  ev->add_option("--codebook", eval_book, "codebook for the quantised feedback path");

  auto* qz = app.add_subcommand("quantize", "fit a Lloyd-Max codebook to a model's codewords");
  quant_opts.attach(qz);
  std::string quant_ckpt, quant_out = "codebook.sdcq";
  std::optional<int> bits;
  qz->add_option("--checkpoint", quant_ckpt, "model checkpoint")->required();
  qz->add_option("--bits", bits, "bits per codeword element");
  qz->add_option("--out", quant_out, "output codebook file");

  auto* ab = app.add_subcommand("ablate", "train every variant over several seeds");
  ablate_opts.attach(ab);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (*gen) {
    ExperimentConfig c = gen_opts.resolve();
    if (samples) c.samples = *samples;
    if (T) c.T = *T;
    if (nc) c.nc = *nc;
    if (nt) c.nt = *nt;
    if (ns) c.ns = *ns;
    if (rho) c.rho = *rho;
    c.data_seed = gen_opts.seed.value_or(c.data_seed);
    c.validate();
    const Dataset ds = make_dataset(c.channel(), c.samples, c.T, c.ns, c.nt, c.nc);
    write_dataset(ds, gen_out);
    std::cout << "wrote " << ds.num_samples << " sequences to " << gen_out << "\n";
    return kExitOk;
  }

  if (*tr) {
    const ExperimentConfig c = train_opts.resolve();
    const Dataset ds = load_or_generate(c);
    TrainResult run = train(c, ds, train_opts.quiet ? nullptr : &std::cerr);
    attach_quantized_metrics(run, ds, c);
    const auto ckpt = c.checkpoint.empty() ? out_path(c, "model.sdck") : fs::path(c.checkpoint);
    write_checkpoint(run.model, ckpt.string());
    report({run.report}, c.out_dir);
    print_summary(run.report);
    std::cout << "checkpoint " << ckpt.string() << "\n";
    return kExitOk;
  }

  if (*ev) {
    const ExperimentConfig c = eval_opts.resolve();
    CodecParams model = read_checkpoint(eval_ckpt);
    const Dataset ds = load_or_generate(c);
    const Splits splits = make_splits(ds.num_samples, c.train_frac, c.val_frac);
    std::optional<QuantizerCodebook> book;
    if (!eval_book.empty()) book = read_codebook(eval_book);
    const EvalResult r = evaluate(model, ds, splits.test, book ? &*book : nullptr);
    std::cout << "nmse_db=" << r.nmse_db;
    if (book) std::cout << " nmse_q_db=" << r.nmse_q_db;
    std::cout << "\n";
    return kExitOk;
  }

  if (*qz) {
    ExperimentConfig c = quant_opts.resolve();
    if (bits) c.bits = *bits;
    c.validate();
    const CodecParams model = read_checkpoint(quant_ckpt);
    const Dataset ds = load_or_generate(c);
    const QuantizerCodebook book = fit_quantizer(model, ds, c);
    write_codebook(book, quant_out);
    std::cout << "wrote " << book.size() << "-level codebook to " << quant_out << "\n";
    return kExitOk;
  }

  if (*ab) {
    const ExperimentConfig c = ablate_opts.resolve();
    const Dataset ds = load_or_generate(c);
    const auto reports = ablate(c, ds, ablate_opts.quiet ? nullptr : &std::cerr);
    report(reports, c.out_dir);
    for (const auto& r : reports) print_summary(r);
    for (const auto& [variant, db] : mean_nmse_by_variant(reports)) std::cout << "mean " << variant << " " << db << " dB\n";
    return kExitOk;
  }
  return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DimensionError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  }
}
