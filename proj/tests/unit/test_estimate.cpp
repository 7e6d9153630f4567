#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "../common/brute.hpp"
#include "tdps/claimsgen/generator.hpp"
#include "tdps/error.hpp"
#include "tdps/estimate/cv.hpp"
#include "tdps/estimate/metrics.hpp"
#include "tdps/rng.hpp"

using namespace tdps;
using namespace tdps::estimate;

namespace {

std::vector<Unit> random_units(Rng& rng, std::size_t n) {
  std::vector<Unit> units(n);
  for (std::size_t i = 0; i < n; ++i) {
    units[i] = {i < 2 ? static_cast<int>(i) : static_cast<int>(rng.index(2)), rng.normal(10, 5),
                rng.uniform(0.001, 0.999)};
  }
  return units;
}

}  // namespace

TEST_CASE("iptw examples") {
  std::vector<Unit> u{{1, 1, 0.5}, {1, 3, 0.5}, {0, 0, 0.5}, {0, 2, 0.5}};
  CHECK(iptw_ate(u) == doctest::Approx(1.0));
  u[0].ps = 1.0;
  CHECK_THROWS_AS(iptw_ate(u), EvaluationError);
  u[0].ps = 0.0;
  CHECK_THROWS_AS(iptw_ate(u), EvaluationError);
}

TEST_CASE("ps mae examples") {
  const std::vector<double> e{0.5, 0.7};
  const std::vector<double> h{0.4, 0.9};
  CHECK(ps_mae(e, h) == doctest::Approx(0.15));
  CHECK(ps_mae_weighted(e, h) == doctest::Approx(0.095));
  CHECK(ps_mae(e, e) == 0.0);
  CHECK(ps_mae_weighted(e, e) == 0.0);
  CHECK_THROWS_AS(ps_mae(e, std::vector<double>{0.1}), ContractViolation);
}

TEST_CASE("trimming and clipping") {
  std::vector<Unit> u{{1, 1, 0.01}, {0, 2, 0.5}, {1, 3, 0.99}, {1, 4, 0.3}};
  CHECK(trimmed_indices(u, 0.05) == std::vector<std::size_t>{1, 3});
  const auto clip = ate_error(u, 0.0, {0.05, TrimMode::Clip});
  std::vector<Unit> clipped = u;
  clipped[0].ps = 0.05;
  clipped[2].ps = 0.95;
  CHECK(clip.ate == doctest::Approx(iptw_ate(clipped)));
  CHECK(clip.n_used == 4);
  const auto trim = ate_error(u, 0.0, {0.05, TrimMode::Trim});
  CHECK(trim.n_used == 2);
  CHECK(trim.ate == doctest::Approx((4 / 0.3 - 2 / 0.5) / 2.0));
  std::vector<Unit> lonely{{1, 1, 0.01}, {0, 2, 0.5}};
  CHECK_THROWS_AS(ate_error(lonely, 0.0, {0.05, TrimMode::Trim}), EvaluationError);
  CHECK_THROWS_AS((TrimSpec{0.5, TrimMode::Trim}.validate()), ConfigError);
  CHECK_THROWS_AS((TrimSpec{0.0, TrimMode::Trim}.validate()), ConfigError);
  CHECK(trim_mode_from_string(to_string(TrimMode::Clip)) == TrimMode::Clip);

  std::vector<Unit> inside{{1, 1, 0.2}, {0, 2, 0.5}, {1, 3, 0.7}};
  CHECK(ate_error(inside, -5, {0.05, TrimMode::None}).error == ate_error(inside, -5, {0.05, TrimMode::Clip}).error);
}

TEST_CASE("metrics match brute force on random instances") {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto units = random_units(rng, 5 + rng.index(50));
    REQUIRE(std::abs(iptw_ate(units) - testing::brute_iptw(units)) < 1e-10);
    std::vector<double> e;
    std::vector<double> h;
    for (const auto& u : units) {
      e.push_back(rng.uniform(0, 1));
      h.push_back(u.ps);
    }
    REQUIRE(std::abs(ps_mae(e, h) - testing::brute_mae(e, h, false)) < 1e-10);
    REQUIRE(std::abs(ps_mae_weighted(e, h) - testing::brute_mae(e, h, true)) < 1e-10);
    const double alpha = rng.uniform(0.001, 0.2);
    REQUIRE(std::abs(ate_error(units, -5, {alpha, TrimMode::Clip}).error -
                     testing::brute_ate_error(units, -5, alpha, TrimMode::Clip)) < 1e-10);
    try {
      const double got = ate_error(units, -5, {alpha, TrimMode::Trim}).error;
      REQUIRE(std::abs(got - testing::brute_ate_error(units, -5, alpha, TrimMode::Trim)) < 1e-10);
    } catch (const EvaluationError&) {
    }
  }
}

TEST_CASE("trimming is monotone in alpha and clipping converges to no adjustment") {
  Rng rng(2);
  const auto units = random_units(rng, 400);
  std::size_t prev = units.size();
  for (double a = 0.01; a < 0.5; a += 0.04) {
    const auto kept = trimmed_indices(units, a).size();
    CHECK(kept <= prev);
    prev = kept;
  }
  const double none = ate_error(units, -5, {0.05, TrimMode::None}).error;
  const double tiny = ate_error(units, -5, {1e-6, TrimMode::Clip}).error;
  CHECK(tiny == doctest::Approx(none));
}

TEST_CASE("kfold partition properties") {
  const auto f = kfold_split(10, 5, 3);
  REQUIRE(f.size() == 5);
  for (const auto& fold : f) {
    CHECK(fold.size() == 2);
  }
  CHECK(kfold_split(10, 5, 3) == f);
  CHECK_THROWS_AS(kfold_split(3, 4, 1), ContractViolation);
  CHECK_THROWS_AS(kfold_split(3, 1, 1), ContractViolation);

  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng.index(10);
    const std::size_t n = k + rng.index(200);
    const auto folds = kfold_split(n, k, trial);
    REQUIRE(folds.size() == k);
    std::vector<int> seen(n, 0);
    std::size_t lo = n;
    std::size_t hi = 0;
    for (const auto& fold : folds) {
      lo = std::min(lo, fold.size());
      hi = std::max(hi, fold.size());
      REQUIRE(std::is_sorted(fold.begin(), fold.end()));
      for (auto i : fold) {
        ++seen[i];
      }
    }
    REQUIRE(hi - lo <= 1);
    REQUIRE(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
  }
}

TEST_CASE("t-based confidence intervals") {
  const auto ones = ci95(std::vector<double>{1, 1, 1});
  CHECK(ones.mean == 1.0);
  CHECK(ones.half_width == 0.0);
  const auto two = ci95(std::vector<double>{0, 2});
  CHECK(two.mean == 1.0);
  CHECK(two.half_width == doctest::Approx(12.706).epsilon(1e-4));
  CHECK_THROWS_AS(ci95(std::vector<double>{1}), ContractViolation);
}

TEST_CASE("attention buckets") {
  models::ClsAttention uniform{{0.25, 0.25, 0.25, 0.25}, {{}, {42}, {7}, {58, 3}}};
  const auto b = attention_buckets(uniform, {42, 58});
  CHECK(b.cls == 0.25);
  CHECK(b.confounder == doctest::Approx(0.25));
  CHECK(b.other == doctest::Approx(0.25));
  CHECK(b.n_confounder == 2);
  CHECK(b.n_other == 1);
  CHECK(b.n_confounder + b.n_other + 1 == uniform.weights.size());

  models::ClsAttention skewed{{0.1, 0.5, 0.3, 0.1}, {{}, {42}, {7}, {58, 3}}};
  const auto s = attention_buckets(skewed, {42, 58});
  CHECK(s.confounder * static_cast<double>(s.n_confounder) + s.other * static_cast<double>(s.n_other) + s.cls ==
        doctest::Approx(1.0));
}

TEST_CASE("cross-validation with baselines") {
  claimsgen::GeneratorParams p;
  p.n_samples = 600;
  const auto data =
      claimsgen::generate_synthetic(p, claimsgen::ScenarioSpec::defaults(claimsgen::ScenarioKind::OccurrenceDistance), 8);
  CvOptions opt;
  opt.estimator = "oracle";
  opt.k = 4;
  opt.seed = 3;
  const auto report = run_cv(data, opt);
  REQUIRE(report.folds.size() == 4);
  CHECK(report.complete);
  std::set<std::size_t> evaluated;
  for (const auto& f : report.folds) {
    CHECK(f.ps_mae == 0.0);
    CHECK(f.ate_true == doctest::Approx(-5.0));
    CHECK(f.n_trimmed <= f.n_eval);
    CHECK(f.n_train + f.n_eval == data.size());
  }

  opt.estimator = "constant";
  const auto constant = run_cv(data, opt);
  const auto folds = kfold_split(data.size(), 4, derive_seed(3, "folds"));
  for (std::size_t f = 0; f < 4; ++f) {
    double treated = 0;
    std::size_t n_train = 0;
    for (std::size_t g = 0; g < 4; ++g) {
      if (g == f) {
        continue;
      }
      for (auto i : folds[g]) {
        treated += data.samples[i].treatment;
        ++n_train;
      }
    }
    const double pbar = treated / static_cast<double>(n_train);
    double mae = 0;
    for (auto i : folds[f]) {
      mae += std::abs(data.samples[i].true_ps - pbar);
    }
    CHECK(constant.folds[f].ps_mae == doctest::Approx(mae / static_cast<double>(folds[f].size())).epsilon(1e-12));
  }

  const auto j = to_json(constant);
  CHECK(j["folds"].size() == 4);
  CHECK(j["schema_version"] == kReportSchemaVersion);
  const auto row = row_from_json(j);
  CHECK(row.metrics.at("ps_mae").mean == doctest::Approx(j["aggregate"]["ps_mae"]["mean"].get<double>()));
  auto bad = j;
  bad["schema_version"] = 99;
  CHECK_THROWS_AS(row_from_json(bad), ConfigError);
}

TEST_CASE("parallel folds give the same report as serial folds") {
  claimsgen::GeneratorParams p;
  p.n_samples = 300;
  const auto data =
      claimsgen::generate_synthetic(p, claimsgen::ScenarioSpec::defaults(claimsgen::ScenarioKind::OccurrenceWindow), 5);
  CvOptions opt;
  opt.estimator = "lr";
  opt.k = 3;
  opt.train.max_epochs = 3;
  const auto serial = run_cv(data, opt);
  opt.threads = 3;
  const auto parallel = run_cv(data, opt);
  for (std::size_t f = 0; f < 3; ++f) {
    CHECK(serial.folds[f].ps_mae == parallel.folds[f].ps_mae);
    CHECK(serial.folds[f].ate_err == parallel.folds[f].ate_err);
  }
}

TEST_CASE("cancelled runs are incomplete") {
  claimsgen::GeneratorParams p;
  p.n_samples = 100;
  const auto data =
      claimsgen::generate_synthetic(p, claimsgen::ScenarioSpec::defaults(claimsgen::ScenarioKind::OccurrenceDistance), 5);
  std::atomic<bool> cancel{true};
  CvOptions opt;
  opt.estimator = "constant";
  opt.k = 3;
  opt.cancel = &cancel;
  const auto report = run_cv(data, opt);
  CHECK_FALSE(report.complete);
  CHECK(report.folds.empty());
}

TEST_CASE("table rendering") {
  ReportRow a{"lr", true, {}, std::nullopt};
  ReportRow b{"bert-code", true, {}, std::map<std::string, Interval95>{}};
  ReportRow c{"constant", false, {}, std::nullopt};
  for (const auto& m : {"ps_mae", "ps_mae_weighted", "ate_err", "ate_err_trim", "ate_err_clip"}) {
    a.metrics[m] = {0.3, 0.01};
    b.metrics[m] = {0.1, 0.02};
    c.metrics[m] = {0.3, 0.0};
  }
  (*b.attention)["confounder"] = {0.2, 0.01};
  (*b.attention)["other"] = {0.01, 0.001};
  (*b.attention)["cls"] = {0.05, 0.001};
  std::vector<ReportRow> rows{a, b, c};
  sort_rows(rows);
  CHECK(rows[0].estimator == "bert-code");
  CHECK(rows[1].estimator == "constant");
  CHECK(rows[2].estimator == "lr");
  const auto table = render_table(rows);
  CHECK(table.find("PS_W") != std::string::npos);
  CHECK(table.find("ATE_C") != std::string::npos);
  CHECK(table.find("CLS") != std::string::npos);
  CHECK(table.find("—") != std::string::npos);
  CHECK(table.find("0.100 ± 0.020") != std::string::npos);
  CHECK(table.find("(incomplete)") != std::string::npos);
}
