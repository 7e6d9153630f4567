#include "tdps/claimsgen/generator.hpp"

#include <algorithm>
#include <cmath>

#include "tdps/claimsgen/scenario.hpp"
#include "tdps/error.hpp"

namespace tdps::claimsgen {

const std::array<double, 5>& control_points(SplineArchetype archetype) {
  static constexpr std::array<std::array<double, 5>, kSplineArchetypes> kControl{{
      {1.0, 1.05, 1.1, 1.15, 1.2},
      {1.0, 0.95, 0.9, 0.85, 0.8},
      {1.0, 1.6, 1.5, 1.45, 1.4},
      {1.0, 0.4, 0.5, 0.55, 0.6},
      {1.0, 1.0, 1.0, 1.0, 1.0},
  }};
  return kControl.at(static_cast<std::size_t>(archetype));
}

double bezier4(const std::array<double, 5>& control, double s) {
  static constexpr std::array<double, 5> kBinomial{1.0, 4.0, 6.0, 4.0, 1.0};
  const double u = 1.0 - s;
  double value = 0.0;
  for (std::size_t j = 0; j < 5; ++j) {
    value += kBinomial[j] * std::pow(s, static_cast<double>(j)) * std::pow(u, static_cast<double>(4 - j)) * control[j];
  }
  return value;
}

std::vector<double> spline_series(SplineArchetype archetype, std::size_t T) {
  require(T >= 1, "spline series needs T >= 1");
  const auto& control = control_points(archetype);
  std::vector<double> out(T);
  for (std::size_t t = 0; t < T; ++t) {
    const double s = T == 1 ? 0.0 : static_cast<double>(t) / static_cast<double>(T - 1);
    out[t] = bezier4(control, s);
  }
  return out;
}

std::vector<double> sample_spline_coeffs(std::size_t T, Rng& rng) {
  require(T >= 1, "sample_spline_coeffs needs T >= 1");
  const auto archetype = static_cast<SplineArchetype>(rng.index(kSplineArchetypes));
  return spline_series(archetype, T);
}

OccurrenceProbs gen_occurrence_probs(const GeneratorParams& params, std::size_t T, Rng& rng) {
  require(T >= 1, "gen_occurrence_probs needs T >= 1");
  const std::size_t dx = params.dx;
  for (double v : {params.static_range.lo, params.static_range.hi, params.dynamic_range.lo, params.dynamic_range.hi,
                   params.boosted_dynamic_range.lo, params.boosted_dynamic_range.hi}) {
    if (!std::isfinite(v)) {
      throw GenerationError("non-finite generator parameter");
    }
  }

  std::vector<bool> boosted(dx, false);
  for (Code c : params.boosted_codes) {
    require(c < dx, "boosted code out of range");
    boosted[c] = true;
  }

  std::vector<double> b(dx);
  std::vector<double> c(dx);
  for (std::size_t k = 0; k < dx; ++k) {
    b[k] = rng.uniform(params.static_range.lo, params.static_range.hi);
  }
  for (std::size_t k = 0; k < dx; ++k) {
    const Interval& range = boosted[k] ? params.boosted_dynamic_range : params.dynamic_range;
    c[k] = rng.uniform(range.lo, range.hi);
  }

  OccurrenceProbs probs{T, dx, std::vector<double>(T * dx)};
  for (std::size_t k = 0; k < dx; ++k) {
    const auto coeff = sample_spline_coeffs(T, rng);
    for (std::size_t t = 0; t < T; ++t) {
      probs.p[t * dx + k] = rng.beta(b[k], c[k] * coeff[t]);
    }
  }
  return probs;
}

RecordSequence sample_records(const OccurrenceProbs& probs, Rng& rng) {
  RecordSequence seq;
  seq.records.resize(probs.T);
  for (std::size_t t = 0; t < probs.T; ++t) {
    for (std::size_t k = 0; k < probs.dx; ++k) {
      if (rng.bernoulli(probs(t, k))) {
        seq.records[t].push_back(static_cast<Code>(k));
      }
    }
  }
  return seq;
}

RecordSequence gen_record_sequence(const GeneratorParams& params, Rng& rng) {
  int T = 0;
  do {
    T = rng.poisson(params.poisson_lambda);
  } while (T < 2);
  const auto probs = gen_occurrence_probs(params, static_cast<std::size_t>(T), rng);
  return sample_records(probs, rng);
}

LabeledSample generate_sample(const GeneratorParams& params, const ScenarioSpec& spec, std::uint64_t seed,
                              std::size_t index) {
  Rng rng(derive_seed(seed, "sample", index));
  auto seq = gen_record_sequence(params, rng);
  return label_sample(index, std::move(seq), spec, rng);
}

namespace {

void check_config(const GeneratorParams& params, const ScenarioSpec& spec) {
  params.validate();
  spec.validate(params.dx);
  if (spec.kind == ScenarioKind::SemiSyntheticDistance) {
    throw ConfigError("the semi-synthetic scenario applies to ingested corpora, not generated data");
  }
  for (Code c : spec.confounding_codes()) {
    if (std::find(params.boosted_codes.begin(), params.boosted_codes.end(), c) == params.boosted_codes.end()) {
      throw ConfigError("confounding code " + std::to_string(c) + " is not one of the boosted codes");
    }
  }
}

ClaimsDataset make_header(const GeneratorParams& params, const ScenarioSpec& spec, std::uint64_t seed) {
  ClaimsDataset data;
  data.dx = params.dx;
  data.scenario = spec;
  data.seed = seed;
  data.params = params;
  data.params->seed = seed;
  data.samples.resize(params.n_samples);
  return data;
}

}  // namespace

ClaimsDataset generate_synthetic(const GeneratorParams& params, const ScenarioSpec& spec, std::uint64_t seed) {
  check_config(params, spec);
  ClaimsDataset data = make_header(params, spec, seed);
  const auto n = static_cast<std::int64_t>(params.n_samples);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::int64_t i = 0; i < n; ++i) {
    data.samples[static_cast<std::size_t>(i)] = generate_sample(params, spec, seed, static_cast<std::size_t>(i));
  }
  return data;
}

ClaimsDataset generate_synthetic_serial(const GeneratorParams& params, const ScenarioSpec& spec, std::uint64_t seed) {
  check_config(params, spec);
  ClaimsDataset data = make_header(params, spec, seed);
  for (std::size_t i = 0; i < params.n_samples; ++i) {
    data.samples[i] = generate_sample(params, spec, seed, i);
  }
  return data;
}

}  // namespace tdps::claimsgen
