#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tdps/claimsgen/corpus.hpp"
#include "tdps/claimsgen/dataset_io.hpp"
#include "tdps/claimsgen/generator.hpp"
#include "tdps/claimsgen/scenario.hpp"
#include "tdps/error.hpp"

using namespace tdps;
using namespace tdps::claimsgen;

namespace {

RecordSequence from_presence(const std::vector<int>& pattern, Code code) {
  RecordSequence s;
  for (int p : pattern) {
    s.records.push_back(p ? CodeSet{code} : CodeSet{});
  }
  return s;
}

RecordSequence random_sequence(Rng& rng, std::size_t dx, double p) {
  RecordSequence s;
  const std::size_t T = 1 + rng.index(12);
  for (std::size_t t = 0; t < T; ++t) {
    CodeSet r;
    for (Code k = 0; k < dx; ++k) {
      if (rng.bernoulli(p)) {
        r.push_back(k);
      }
    }
    s.records.push_back(r);
  }
  return s;
}

std::size_t brute_consec(const RecordSequence& s, Code code) {
  std::size_t best = 0;
  for (std::size_t i = 0; i < s.length(); ++i) {
    for (std::size_t j = i; j < s.length(); ++j) {
      bool all = true;
      for (std::size_t t = i; t <= j; ++t) {
        all = all && s.contains(t, code);
      }
      if (all) {
        best = std::max(best, j - i + 1);
      }
    }
  }
  return best;
}

std::optional<std::size_t> brute_distance(const RecordSequence& s, Code a, Code b) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < s.length(); ++i) {
    for (std::size_t j = 0; j < s.length(); ++j) {
      if (s.contains(i, a) && s.contains(j, b)) {
        const std::size_t d = i > j ? i - j : j - i;
        if (!best || d < *best) {
          best = d;
        }
      }
    }
  }
  return best;
}

std::size_t brute_window(const RecordSequence& s, Code code, std::size_t w) {
  std::size_t n = 0;
  for (std::size_t t = 0; t < s.length(); ++t) {
    if (t + w >= s.length() && s.contains(t, code)) {
      ++n;
    }
  }
  return n;
}

double logistic(double z) {
  return 1.0 / (1.0 + std::exp(-z));
}

// Piecewise propensity means written out independently of the library.
double brute_ps_mean(const RecordSequence& s, const ScenarioSpec& spec) {
  switch (spec.kind) {
    case ScenarioKind::ConsecutiveOccurrence: {
      const auto o = brute_consec(s, spec.code_a);
      return o > 1 ? logistic(static_cast<double>(o)) : (o == 1 ? 0.3 : 0.1);
    }
    case ScenarioKind::OccurrenceDistance: {
      const auto d = brute_distance(s, spec.code_a, *spec.code_b);
      return d ? logistic(std::log(10.0 / (5.0 * static_cast<double>(*d) + 1.0))) : 0.3;
    }
    case ScenarioKind::OccurrenceWindow: {
      const auto c = brute_window(s, spec.code_a, spec.window);
      return c >= 1 ? logistic(static_cast<double>(c)) : 0.1;
    }
    case ScenarioKind::SemiSyntheticDistance: {
      const auto d = static_cast<double>(*brute_distance(s, spec.code_a, *spec.code_b));
      return logistic(2.0 * std::log(10.0 / std::pow(d, 2.5)));
    }
  }
  return 0.0;
}

ScenarioSpec noiseless(ScenarioKind kind) {
  auto spec = ScenarioSpec::defaults(kind);
  spec.ps_noise_var = 1e-300;
  spec.outcome_noise_var = 1e-300;
  spec.ps_clamp = {1e-9, 1 - 1e-9};
  return spec;
}

}  // namespace

TEST_CASE("spline archetypes") {
  Rng rng(1);
  CHECK(spline_series(SplineArchetype::Stable, 5) == std::vector<double>(5, 1.0));
  const auto inc = spline_series(SplineArchetype::MildIncline, 3);
  REQUIRE(inc.size() == 3);
  CHECK(inc[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(inc[1] == doctest::Approx(1.1).epsilon(1e-12));
  CHECK(inc[2] == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(spline_series(SplineArchetype::SteepDeclineMildIncline, 1) == std::vector<double>{1.0});
  for (int i = 0; i < 200; ++i) {
    const auto s = sample_spline_coeffs(1 + rng.index(20), rng);
    CHECK(*std::min_element(s.begin(), s.end()) > 0.0);
  }
  CHECK_THROWS_AS(sample_spline_coeffs(0, rng), ContractViolation);
}

TEST_CASE("bezier endpoints equal first and last control points") {
  for (auto a : {SplineArchetype::MildIncline, SplineArchetype::MildDecline, SplineArchetype::SteepInclineMildDecline,
                 SplineArchetype::SteepDeclineMildIncline, SplineArchetype::Stable}) {
    const auto& c = control_points(a);
    CHECK(bezier4(c, 0.0) == doctest::Approx(c[0]));
    CHECK(bezier4(c, 1.0) == doctest::Approx(c[4]));
  }
}

TEST_CASE("occurrence probabilities lie in [0,1] and follow the Beta mean") {
  GeneratorParams p;
  p.dx = 10;
  p.boosted_codes = {3};
  p.static_range = {5.0, 5.0 + 1e-9};
  p.dynamic_range = {245.0, 245.0 + 1e-9};
  Rng rng(3);
  double sum = 0.0;
  std::size_t n = 0;
  for (int i = 0; i < 400; ++i) {
    const auto P = gen_occurrence_probs(p, 1, rng);
    for (std::size_t k = 0; k < p.dx; ++k) {
      CHECK(P(0, k) >= 0.0);
      CHECK(P(0, k) <= 1.0);
      if (k != 3) {
        sum += P(0, k);
        ++n;
      }
    }
  }
  // T = 1 evaluates every spline at 0, where all archetypes equal 1.
  CHECK(sum / static_cast<double>(n) == doctest::Approx(0.02).epsilon(0.05));
}

TEST_CASE("zero occurrence probabilities give empty records") {
  OccurrenceProbs P{4, 6, std::vector<double>(24, 0.0)};
  Rng rng(2);
  const auto s = sample_records(P, rng);
  CHECK(s.length() == 4);
  CHECK(s.code_count() == 0);
}

TEST_CASE("consec_feature examples and brute-force oracle") {
  CHECK(consec_feature(from_presence({1, 1, 0, 1}, 4), 4) == 2);
  CHECK(consec_feature(from_presence({0, 0, 0}, 4), 4) == 0);
  CHECK(consec_feature(from_presence({0, 1, 1, 1, 0, 1, 1}, 4), 4) == 3);
  Rng rng(11);
  for (int i = 0; i < 10000; ++i) {
    const auto s = random_sequence(rng, 4, 0.4);
    const Code c = static_cast<Code>(rng.index(4));
    REQUIRE(consec_feature(s, c) == brute_consec(s, c));
  }
}

TEST_CASE("distance_feature examples and brute-force oracle") {
  RecordSequence s;
  s.records = {{}, {}, {1}, {}, {}, {2}};
  CHECK(distance_feature(s, 1, 2) == std::optional<std::size_t>(3));
  s.records = {{1, 2}, {}};
  CHECK(distance_feature(s, 1, 2) == std::optional<std::size_t>(0));
  s.records = std::vector<CodeSet>(9);
  s.records[1] = {1};
  s.records[7] = {1};
  s.records[4] = {2};
  s.records[8] = {2};
  CHECK(distance_feature(s, 1, 2) == std::optional<std::size_t>(1));
  s.records = {{1}, {1}};
  CHECK_FALSE(distance_feature(s, 1, 2).has_value());
  Rng rng(12);
  for (int i = 0; i < 10000; ++i) {
    const auto r = random_sequence(rng, 4, 0.3);
    REQUIRE(distance_feature(r, 0, 3) == brute_distance(r, 0, 3));
  }
}

TEST_CASE("window_feature examples and brute-force oracle") {
  CHECK(window_feature(from_presence({0, 0, 1, 1, 1}, 5), 5, 3) == 3);
  CHECK(window_feature(from_presence({1, 0, 0, 0, 0}, 5), 5, 3) == 0);
  CHECK(window_feature(from_presence({1, 1}, 5), 5, 3) == 2);
  Rng rng(13);
  for (int i = 0; i < 10000; ++i) {
    const auto s = random_sequence(rng, 4, 0.4);
    const std::size_t w = 1 + rng.index(5);
    REQUIRE(window_feature(s, 2, w) == brute_window(s, 2, w));
  }
}

TEST_CASE("closed-form propensity values") {
  const auto od = ScenarioSpec::defaults(ScenarioKind::OccurrenceDistance);
  CHECK(propensity_mean(std::nullopt, od) == doctest::Approx(0.3));
  CHECK(propensity_mean(1, od) == doctest::Approx(0.625).epsilon(1e-12));
  const auto semi = ScenarioSpec::defaults(ScenarioKind::SemiSyntheticDistance);
  CHECK(propensity_mean(2, semi) == doctest::Approx(100.0 / 132.0).epsilon(1e-12));
  CHECK(propensity_mean(1, semi) == doctest::Approx(100.0 / 101.0).epsilon(1e-12));
  CHECK_THROWS_AS(propensity_mean(0, semi), ScenarioError);
  CHECK_THROWS_AS(propensity_mean(std::nullopt, semi), ScenarioError);
  const auto ow = ScenarioSpec::defaults(ScenarioKind::OccurrenceWindow);
  CHECK(propensity_mean(0, ow) == doctest::Approx(0.1));
  CHECK(propensity_mean(1, ow) == doctest::Approx(logistic(1.0)));
  const auto co = ScenarioSpec::defaults(ScenarioKind::ConsecutiveOccurrence);
  CHECK(propensity_mean(0, co) == doctest::Approx(0.1));
  CHECK(propensity_mean(1, co) == doctest::Approx(0.3));
  CHECK(propensity_mean(3, co) == doctest::Approx(logistic(3.0)));
}

TEST_CASE("closed-form outcome values") {
  CHECK(outcome_mean(1, ScenarioSpec::defaults(ScenarioKind::OccurrenceDistance)) == doctest::Approx(30.0));
  CHECK(outcome_mean(std::nullopt, ScenarioSpec::defaults(ScenarioKind::OccurrenceDistance)) == doctest::Approx(10.0));
  CHECK(outcome_mean(2, ScenarioSpec::defaults(ScenarioKind::OccurrenceWindow)) == doctest::Approx(30.0));
  CHECK(outcome_mean(1, ScenarioSpec::defaults(ScenarioKind::ConsecutiveOccurrence)) == doctest::Approx(10.0));
  CHECK(outcome_mean(3, ScenarioSpec::defaults(ScenarioKind::ConsecutiveOccurrence)) == doctest::Approx(40.0));
  CHECK(outcome_mean(2, ScenarioSpec::defaults(ScenarioKind::SemiSyntheticDistance)) == doctest::Approx(12.5));
}

TEST_CASE("scenario propensity with negligible noise matches the piecewise oracle") {
  Rng rng(21);
  for (auto kind : {ScenarioKind::ConsecutiveOccurrence, ScenarioKind::OccurrenceDistance,
                    ScenarioKind::OccurrenceWindow}) {
    auto spec = noiseless(kind);
    for (int i = 0; i < 1000; ++i) {
      auto s = random_sequence(rng, 100, 0.05);
      for (auto& r : s.records) {
        if (rng.bernoulli(0.4)) {
          r.push_back(spec.code_a);
        }
        if (spec.code_b && rng.bernoulli(0.3)) {
          r.push_back(*spec.code_b);
        }
        canonicalize(r);
      }
      const double e = scenario_propensity(s, spec, rng);
      REQUIRE(std::abs(e - brute_ps_mean(s, spec)) < 1e-12);
    }
  }
  auto semi = noiseless(ScenarioKind::SemiSyntheticDistance);
  semi.code_a = 0;
  semi.code_b = 1;
  for (int i = 0; i < 1000; ++i) {
    RecordSequence s;
    s.records.assign(2 + rng.index(8), CodeSet{});
    const auto ta = rng.index(s.length());
    auto tb = rng.index(s.length());
    if (tb == ta) {
      tb = (ta + 1) % s.length();
    }
    s.records[ta] = {0};
    s.records[tb] = {1};
    REQUIRE(std::abs(scenario_propensity(s, semi, rng) - brute_ps_mean(s, semi)) < 1e-12);
  }
}

TEST_CASE("outcomes keep y1 - y0 at the treatment effect and the propensity inside the clamp") {
  GeneratorParams p;
  p.n_samples = 2000;
  const auto data = generate_synthetic(p, ScenarioSpec::defaults(ScenarioKind::OccurrenceDistance), 5);
  for (const auto& s : data.samples) {
    REQUIRE(std::abs((s.y1 - s.y0) - (-5.0)) < 1e-9);
    REQUIRE(s.true_ps >= 0.01);
    REQUIRE(s.true_ps <= 0.99);
    REQUIRE(s.outcome == (s.treatment == 1 ? s.y1 : s.y0));
    REQUIRE(s.seq.length() >= 2);
  }
}

TEST_CASE("assign_treatment") {
  Rng rng(8);
  int ones = 0;
  for (int i = 0; i < 100000; ++i) {
    ones += assign_treatment(0.5, rng);
  }
  CHECK(ones / 1e5 >= 0.49);
  CHECK(ones / 1e5 <= 0.51);
  CHECK(assign_treatment(1 - 1e-9, rng) == 1);
  CHECK_THROWS_AS(assign_treatment(0.0, rng), ContractViolation);
  CHECK_THROWS_AS(assign_treatment(1.0, rng), ContractViolation);
}

TEST_CASE("generation is deterministic and independent of the thread count") {
  GeneratorParams p;
  p.n_samples = 300;
  const auto spec = ScenarioSpec::defaults(ScenarioKind::OccurrenceWindow);
  const auto a = generate_synthetic(p, spec, 42);
  const auto b = generate_synthetic_serial(p, spec, 42);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a.samples[i].seq == b.samples[i].seq);
    REQUIRE(a.samples[i].true_ps == b.samples[i].true_ps);
    REQUIRE(a.samples[i].y0 == b.samples[i].y0);
    REQUIRE(a.samples[i].treatment == b.samples[i].treatment);
  }
  const auto c = generate_synthetic(p, spec, 43);
  CHECK_FALSE(c.samples[0].seq == a.samples[0].seq);
}

TEST_CASE("generator config errors") {
  GeneratorParams p;
  p.n_samples = 0;
  CHECK_THROWS_AS(generate_synthetic(p, ScenarioSpec::defaults(ScenarioKind::OccurrenceDistance), 1), ConfigError);
  GeneratorParams q;
  auto spec = ScenarioSpec::defaults(ScenarioKind::OccurrenceDistance);
  spec.code_a = 5;  // not boosted
  CHECK_THROWS_AS(generate_synthetic(q, spec, 1), ConfigError);
  GeneratorParams r;
  r.static_range = {10.0, 5.0};
  CHECK_THROWS_AS(r.validate(), ConfigError);
}

TEST_CASE("distributional checks on record counts and code frequencies") {
  GeneratorParams p;
  p.n_samples = 10000;
  const auto data = generate_synthetic(p, ScenarioSpec::defaults(ScenarioKind::OccurrenceDistance), 9);
  const auto summary = summarize(data);
  // Poisson(10) conditioned on T >= 2 has mean within 1e-3 of 10.
  const double se = std::sqrt(10.0 / 10000.0);
  CHECK(std::abs(summary.avg_record_length - 10.0) < 3 * se);
  // Non-boosted codes: mean Beta probability ~ 7.5 / (7.5 + 250 * spline), spline mean ~ 1.
  std::size_t records = 0;
  std::size_t boosted = 0;
  for (const auto& s : data.samples) {
    records += s.seq.length();
    for (const auto& r : s.seq.records) {
      boosted += static_cast<std::size_t>(std::count(r.begin(), r.end(), 42u));
    }
  }
  const double freq = static_cast<double>(boosted) / static_cast<double>(records);
  CHECK(freq > 0.10);
  CHECK(freq < 0.16);
}

TEST_CASE("dataset round-trip through JSON Lines") {
  GeneratorParams p;
  p.n_samples = 50;
  const auto data = generate_synthetic(p, ScenarioSpec::defaults(ScenarioKind::ConsecutiveOccurrence), 4);
  const auto dir = std::filesystem::temp_directory_path() / "tdps_claimsgen_test";
  std::filesystem::create_directories(dir);
  save_dataset(data, dir / "d.jsonl");
  CHECK(std::filesystem::exists(dir / "d.header.json"));
  const auto back = load_dataset(dir / "d.jsonl");
  REQUIRE(back.size() == data.size());
  CHECK(back.dx == data.dx);
  CHECK(back.scenario.kind == data.scenario.kind);
  for (std::size_t i = 0; i < data.size(); ++i) {
    REQUIRE(back.samples[i].seq == data.samples[i].seq);
    REQUIRE(back.samples[i].true_ps == data.samples[i].true_ps);
    REQUIRE(back.samples[i].outcome == data.samples[i].outcome);
  }
  CHECK_THROWS_AS(load_dataset(dir / "missing.jsonl"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("corpus ingestion") {
  std::istringstream in(
      "patient_id,date,code\n"
      "p1,2020-01-01,a\n"
      "p1,2020-02-01,b\n"
      "p1,2020-02-01,c\n"
      "p1,2020-02-01,c\n"
      "p2,2020-01-01,a\n");
  const auto corpus = ingest_corpus(in);
  REQUIRE(corpus.patients.size() == 1);
  CHECK(corpus.dropped_short == 1);
  CHECK(corpus.vocabulary == std::vector<std::string>{"a", "b", "c"});
  const auto& seq = corpus.patients[0].seq;
  REQUIRE(seq.length() == 2);
  CHECK(seq.records[0] == CodeSet{0});
  CHECK(seq.records[1] == CodeSet{1, 2});

  std::istringstream bad_date("patient_id,date,code\np1,01/02/2020,a\n");
  CHECK_THROWS_AS(ingest_corpus(bad_date), IngestionError);
  std::istringstream bad_row("patient_id,date,code\np1,2020-01-01\n");
  try {
    ingest_corpus(bad_row);
    FAIL("expected an ingestion error");
  } catch (const IngestionError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("semi-synthetic injection filters the cohort") {
  std::istringstream in(
      "patient_id,date,code\n"
      "p1,2020-01-01,x\n"
      "p1,2020-03-01,y\n"
      "p2,2020-01-01,x\n"
      "p2,2020-02-01,z\n"
      "p3,2020-01-01,x\n"
      "p3,2020-01-01,y\n"
      "p3,2020-02-01,z\n");
  const auto corpus = ingest_corpus(in);
  auto spec = ScenarioSpec::defaults(ScenarioKind::SemiSyntheticDistance);
  spec.code_a = *corpus.code_index("x");
  spec.code_b = *corpus.code_index("y");
  const auto data = inject_semisynthetic(corpus, spec, 3);
  // p2 lacks y; p3 has both codes in one record (d = 0).
  REQUIRE(data.size() == 1);
  CHECK(data.vocabulary == corpus.vocabulary);
  std::istringstream lonely_csv(
      "patient_id,date,code\np1,2020-01-01,y\np1,2020-01-02,y\np2,2020-01-01,q\np2,2020-01-02,q\n");
  const auto lonely = ingest_corpus(lonely_csv);
  spec.code_a = *lonely.code_index("q");
  spec.code_b = *lonely.code_index("y");
  CHECK_THROWS_AS(inject_semisynthetic(lonely, spec, 3), ScenarioError);
}
