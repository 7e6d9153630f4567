#include "tdps/claimsgen/scenario.hpp"

#include <algorithm>
#include <cmath>

#include "tdps/error.hpp"

namespace tdps::claimsgen {

std::size_t consec_feature(const RecordSequence& seq, Code code) {
  std::size_t best = 0;
  std::size_t run = 0;
  for (std::size_t t = 0; t < seq.length(); ++t) {
    run = seq.contains(t, code) ? run + 1 : 0;
    best = std::max(best, run);
  }
  return best;
}

std::optional<std::size_t> distance_feature(const RecordSequence& seq, Code code_a, Code code_b) {
  require(code_a != code_b, "distance_feature needs two distinct codes");
  // Single sweep tracking the latest position of each code.
  std::optional<std::size_t> last_a;
  std::optional<std::size_t> last_b;
  std::optional<std::size_t> best;
  for (std::size_t t = 0; t < seq.length(); ++t) {
    const bool has_a = seq.contains(t, code_a);
    const bool has_b = seq.contains(t, code_b);
    if (has_a) {
      last_a = t;
    }
    if (has_b) {
      last_b = t;
    }
    std::optional<std::size_t> d;
    if (has_a && last_b) {
      d = t - *last_b;
    }
    if (has_b && last_a) {
      d = d ? std::min(*d, t - *last_a) : t - *last_a;
    }
    if (d && (!best || *d < *best)) {
      best = d;
    }
  }
  return best;
}

std::size_t window_feature(const RecordSequence& seq, Code code, std::size_t window) {
  require(window >= 1, "window must be at least 1");
  const std::size_t T = seq.length();
  const std::size_t start = T > window ? T - window : 0;
  std::size_t count = 0;
  for (std::size_t t = start; t < T; ++t) {
    count += seq.contains(t, code) ? 1 : 0;
  }
  return count;
}

std::optional<std::size_t> scenario_feature(const RecordSequence& seq, const ScenarioSpec& spec) {
  switch (spec.kind) {
    case ScenarioKind::ConsecutiveOccurrence:
      return consec_feature(seq, spec.code_a);
    case ScenarioKind::OccurrenceWindow:
      return window_feature(seq, spec.code_a, spec.window);
    case ScenarioKind::OccurrenceDistance:
    case ScenarioKind::SemiSyntheticDistance:
      require(spec.code_b.has_value(), "distance scenario without code_b");
      return distance_feature(seq, spec.code_a, *spec.code_b);
  }
  throw ContractViolation("unhandled scenario kind");
}

double sigmoid(double z) {
  return 1.0 / (1.0 + std::exp(-z));
}

namespace {

std::size_t semisynthetic_distance(std::optional<std::size_t> feature) {
  if (!feature || *feature == 0) {
    throw ScenarioError("semi-synthetic scenario requires both codes at distance >= 1; filter the cohort first");
  }
  return *feature;
}

}  // namespace

double propensity_mean(std::optional<std::size_t> feature, const ScenarioSpec& spec) {
  switch (spec.kind) {
    case ScenarioKind::ConsecutiveOccurrence: {
      const std::size_t o = feature.value_or(0);
      if (o > 1) {
        return sigmoid(static_cast<double>(o));
      }
      return o == 1 ? 0.3 : 0.1;
    }
    case ScenarioKind::OccurrenceDistance:
      if (!feature) {
        return 0.3;
      }
      return sigmoid(std::log(10.0 / (5.0 * static_cast<double>(*feature) + 1.0)));
    case ScenarioKind::OccurrenceWindow: {
      const std::size_t c = feature.value_or(0);
      return c >= 1 ? sigmoid(static_cast<double>(c)) : 0.1;
    }
    case ScenarioKind::SemiSyntheticDistance: {
      const auto d = static_cast<double>(semisynthetic_distance(feature));
      return sigmoid(2.0 * std::log(10.0 / std::pow(d, 2.5)));
    }
  }
  throw ContractViolation("unhandled scenario kind");
}

double outcome_mean(std::optional<std::size_t> feature, const ScenarioSpec& spec) {
  const double b = spec.base_outcome;
  const double alpha = spec.outcome_coef;
  switch (spec.kind) {
    case ScenarioKind::ConsecutiveOccurrence: {
      const std::size_t o = feature.value_or(0);
      return o > 1 ? b + alpha * static_cast<double>(o) : b;
    }
    case ScenarioKind::OccurrenceDistance:
      return feature ? b + alpha / (static_cast<double>(*feature) + 1.0) : b;
    case ScenarioKind::OccurrenceWindow:
      return b + alpha * static_cast<double>(feature.value_or(0));
    case ScenarioKind::SemiSyntheticDistance:
      return b + alpha / static_cast<double>(semisynthetic_distance(feature));
  }
  throw ContractViolation("unhandled scenario kind");
}

double scenario_propensity(const RecordSequence& seq, const ScenarioSpec& spec, Rng& rng) {
  const double mean = propensity_mean(scenario_feature(seq, spec), spec);
  const double e = mean + rng.normal(0.0, std::sqrt(spec.ps_noise_var));
  return std::clamp(e, spec.ps_clamp.lo, spec.ps_clamp.hi);
}

std::pair<double, double> scenario_outcome(const RecordSequence& seq, const ScenarioSpec& spec, Rng& rng) {
  const double y0 = outcome_mean(scenario_feature(seq, spec), spec) + rng.normal(0.0, std::sqrt(spec.outcome_noise_var));
  return {y0, y0 + spec.treatment_effect};
}

int assign_treatment(double e, Rng& rng) {
  require(e > 0.0 && e < 1.0, "treatment probability must lie in (0,1)");
  return rng.bernoulli(e) ? 1 : 0;
}

LabeledSample label_sample(std::uint64_t id, RecordSequence seq, const ScenarioSpec& spec, Rng& rng) {
  LabeledSample s;
  s.id = id;
  s.true_ps = scenario_propensity(seq, spec, rng);
  std::tie(s.y0, s.y1) = scenario_outcome(seq, spec, rng);
  s.treatment = assign_treatment(s.true_ps, rng);
  s.outcome = s.treatment == 1 ? s.y1 : s.y0;
  s.seq = std::move(seq);
  return s;
}

}  // namespace tdps::claimsgen
