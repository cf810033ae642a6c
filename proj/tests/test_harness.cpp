// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <filesystem>
#include <sstream>

#include "support/check.hpp"

using namespace sdcsi;
using Catch::Matchers::WithinAbs;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.samples = 40;
  c.T = 2;
  c.nc = 4;
  c.nt = 4;
  c.ns = 16;
  c.max_delay_tap = 4;
  c.epochs = 3;
  c.batch_size = 8;
  c.seeds = 1;
  c.bits = 3;
  return c;
}

Dataset tiny_data(const ExperimentConfig& c) { return make_dataset(c.channel(), c.samples, c.T, c.ns, c.nt, c.nc); }

}  // namespace

TEST_CASE("NMSE reference values") {
  const Tensor h({2, 3}, {1.0, -2.0, 0.5, 3.0, 0.0, -1.0});
  CHECK(nmse_stats(h, h).linear == 0.0);
  CHECK(std::isinf(nmse_stats(h, h).db()));
  CHECK_THAT(nmse_stats(h, Tensor::zeros({2, 3})).db(), WithinAbs(0.0, 1e-12));
  CHECK_THAT(nmse_stats(h, scale(h, 1.1)).db(), WithinAbs(-20.0, 1e-9));
}

TEST_CASE("NMSE averages per-sample ratios and skips silent samples") {
  // Sample 0 has error ratio 1/4, sample 1 ratio 1, sample 2 carries no energy.
  const Tensor ref({3, 1, 1, 1, 2}, {2.0, 0.0, 1.0, 1.0, 0.0, 0.0});
  const Tensor est({3, 1, 1, 1, 2}, {1.0, 0.0, 0.0, 0.0, 5.0, 5.0});
  const auto st = nmse_stats(ref, est);
  CHECK(st.used == 2);
  CHECK(st.excluded == 1);
  CHECK_THAT(st.linear, WithinAbs((0.25 + 1.0) / 2.0, 1e-15));
}

TEST_CASE("NMSE is taken after undoing the normalisation") {
  std::mt19937_64 rng(3);
  const Tensor raw = testing::random_tensor({2, 2, 2, 4, 4}, rng);
  const Tensor raw_hat = testing::random_tensor({2, 2, 2, 4, 4}, rng);
  const NormRecord pure{0.0, 0.2};
  const double direct = nmse_stats(raw, raw_hat).db();
  CHECK_THAT(nmse(apply_norm(raw, pure), apply_norm(raw_hat, pure), pure), WithinAbs(direct, 1e-9));
  CHECK_THAT(nmse_stats(apply_norm(raw, pure), apply_norm(raw_hat, pure)).db(), WithinAbs(direct, 1e-9));
  const NormRecord shifted{0.5, 0.2};
  CHECK_THAT(nmse(apply_norm(raw, shifted), apply_norm(raw_hat, shifted), shifted), WithinAbs(direct, 1e-9));
  CHECK(std::abs(nmse_stats(apply_norm(raw, shifted), apply_norm(raw_hat, shifted)).db() - direct) > 1.0);
}

TEST_CASE("configuration text") {
  std::istringstream text(
      "# desk run\n"
      "sigma = 1/8\n"
      "variant = lstm   # trailing comment\n"
      "epochs=7\n"
      "\n"
      "sf.quantile = 0.25\n");
  ExperimentConfig c;
  apply_config_text(c, text);
  CHECK(c.sigma == 0.125);
  CHECK(c.variant == Variant::PlusLstm);
  CHECK(c.epochs == 7);
  CHECK(c.quantile == 0.25);

  std::istringstream unknown("sigmaa = 0.5\n");
  CHECK_THROWS_AS(apply_config_text(c, unknown), ConfigError);
  std::istringstream malformed("epochs\n");
  CHECK_THROWS_AS(apply_config_text(c, malformed), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "epochs", "ten"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "epochs", "-3"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "sigma", "1/0"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/desk.cfg"), ConfigError);

  ExperimentConfig bad;
  bad.sigma = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ExperimentConfig{};
  bad.max_delay_tap = 9;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_NOTHROW(ExperimentConfig{}.validate());
}

TEST_CASE("splits are disjoint, contiguous and cover the data") {
  const Splits s = make_splits(512, 0.7, 0.15);
  CHECK(s.train.size() == 358);
  CHECK(s.val.size() == 77);
  CHECK(s.test.size() == 77);
  std::vector<std::size_t> all = s.train;
  all.insert(all.end(), s.val.begin(), s.val.end());
  all.insert(all.end(), s.test.begin(), s.test.end());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
  CHECK_THROWS_AS(make_splits(3, 0.7, 0.15), ConfigError);
  CHECK_THROWS_AS(make_splits(100, 0.9, 0.2), ConfigError);
}

TEST_CASE("training is deterministic and reduces the loss") {
  const ExperimentConfig cfg = tiny_config();
  const Dataset ds = tiny_data(cfg);
  TrainResult a = train(cfg, ds);
  TrainResult b = train(cfg, ds);
  CHECK(a.report.train_loss == b.report.train_loss);
  CHECK(a.report.val_loss == b.report.val_loss);
  CHECK(a.report.nmse_db == b.report.nmse_db);
  CHECK(a.report.train_loss.size() == 3);
  CHECK(a.report.train_loss.back() < a.report.train_loss.front());
  CHECK(a.report.optimizer_steps == 3 * 4);  // 28 training samples in batches of 8
  for (const auto& [name, t] : a.model.params) CHECK(testing::max_abs_diff(t.data(), b.model.params.get(name).data()) == 0.0);
}

TEST_CASE("training validates its inputs") {
  ExperimentConfig cfg = tiny_config();
  const Dataset ds = tiny_data(cfg);
  cfg.nc = 8;
  CHECK_THROWS_AS(train(cfg, ds), ConfigError);
  cfg = tiny_config();
  cfg.batch_size = 64;
  CHECK_THROWS_AS(train(cfg, ds), ConfigError);
}

TEST_CASE("a non-finite loss aborts training") {
  const ExperimentConfig cfg = tiny_config();
  Dataset ds = tiny_data(cfg);
  ds.values[5] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(train(cfg, ds), NumericalError);
}

TEST_CASE("quantised evaluation and the ablation sweep") {
  ExperimentConfig cfg = tiny_config();
  cfg.epochs = 1;
  const Dataset ds = tiny_data(cfg);
  TrainResult run = train(cfg, ds);
  const auto book = attach_quantized_metrics(run, ds, cfg);
  CHECK(book.size() == 8);
  CHECK(std::isfinite(run.report.nmse_q_db));

  const auto reports = ablate(cfg, ds);
  REQUIRE(reports.size() == 4);
  for (const auto& r : reports) {
    CHECK(r.optimizer_steps == reports.front().optimizer_steps);
    CHECK(std::isfinite(r.nmse_db));
  }
  CHECK(reports[0].variant == "baseline");
  CHECK(reports[3].variant == "full");
  const auto means = mean_nmse_by_variant(reports);
  CHECK(means.size() == 4);
}

TEST_CASE("reports serialise deterministically and round trip") {
  MetricsReport r;
  r.variant = "full";
  r.sigma = 0.25;
  r.seed = 3;
  r.train_loss = {0.1, 0.05};
  r.val_loss = {0.2, 0.1};
  r.nmse_db = -12.345678901234567;
  r.nmse_q_db = -std::numeric_limits<double>::infinity();
  r.nmse_init_db = 0.01;
  r.params_ue = 10;
  r.params_bs = 20;
  r.params_total = 30;
  r.config = config_echo(ExperimentConfig{});
  const std::vector<MetricsReport> reports{r, r};
  CHECK(reports_json(reports) == reports_json(reports));
  CHECK(reports_csv(reports) == reports_csv(reports));

  const auto j = nlohmann::json::parse(reports_json(reports));
  const MetricsReport back = report_from_json(j.at("reports").at(0));
  CHECK(back.nmse_db == r.nmse_db);
  CHECK(back.nmse_q_db == kDbFloor);  // clamped on the way out
  CHECK(back.config == r.config);
  CHECK(reports_json({back, back}) == reports_json(reports));

  const std::string csv = reports_csv({r});
  CHECK(csv.rfind("variant,sigma,seed,nmse_db,nmse_q_db,params_ue,params_bs\n", 0) == 0);
  CHECK(csv.find("full,0.25,3,-12.345678901234567,-300,10,20\n") != std::string::npos);

  const auto dir = std::filesystem::temp_directory_path() / "sdcsi_report_test";
  report(reports, dir.string());
  CHECK(std::filesystem::exists(dir / "results.json"));
  CHECK(std::filesystem::exists(dir / "results.csv"));
  std::filesystem::remove_all(dir);
}
