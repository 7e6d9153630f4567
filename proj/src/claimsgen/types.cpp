#include "tdps/claimsgen/types.hpp"

#include <algorithm>
#include <cmath>

#include "tdps/error.hpp"

namespace tdps::claimsgen {

bool RecordSequence::contains(std::size_t t, Code code) const {
  const auto& r = records.at(t);
  return std::binary_search(r.begin(), r.end(), code);
}

std::size_t RecordSequence::code_count() const {
  std::size_t n = 0;
  for (const auto& r : records) {
    n += r.size();
  }
  return n;
}

void RecordSequence::validate(std::size_t dx) const {
  for (std::size_t t = 0; t < records.size(); ++t) {
    const auto& r = records[t];
    for (std::size_t j = 0; j < r.size(); ++j) {
      require(r[j] < dx, "code " + std::to_string(r[j]) + " out of range in record " + std::to_string(t));
      require(j == 0 || r[j - 1] < r[j], "record " + std::to_string(t) + " is not a sorted code set");
    }
  }
}

void canonicalize(CodeSet& codes) {
  std::sort(codes.begin(), codes.end());
  codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
}

namespace {

bool valid_interval(const Interval& iv) {
  return std::isfinite(iv.lo) && std::isfinite(iv.hi) && iv.lo < iv.hi;
}

}  // namespace

void GeneratorParams::validate() const {
  if (n_samples == 0) {
    throw ConfigError("n_samples must be positive");
  }
  if (dx == 0) {
    throw ConfigError("dx must be positive");
  }
  if (!(std::isfinite(poisson_lambda) && poisson_lambda > 0.0)) {
    throw ConfigError("poisson_lambda must be a positive finite number");
  }
  if (!valid_interval(static_range) || static_range.lo <= 0.0) {
    throw ConfigError("static_range must be a positive interval with lo < hi");
  }
  if (!valid_interval(dynamic_range) || dynamic_range.lo <= 0.0) {
    throw ConfigError("dynamic_range must be a positive interval with lo < hi");
  }
  if (!valid_interval(boosted_dynamic_range) || boosted_dynamic_range.lo <= 0.0) {
    throw ConfigError("boosted_dynamic_range must be a positive interval with lo < hi");
  }
  std::vector<Code> sorted = boosted_codes;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError("boosted_codes must be distinct");
  }
  for (Code c : boosted_codes) {
    if (c >= dx) {
      throw ConfigError("boosted code " + std::to_string(c) + " is out of range for dx=" + std::to_string(dx));
    }
  }
}

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::ConsecutiveOccurrence:
      return "consecutive_occurrence";
    case ScenarioKind::OccurrenceDistance:
      return "occurrence_distance";
    case ScenarioKind::OccurrenceWindow:
      return "occurrence_window";
    case ScenarioKind::SemiSyntheticDistance:
      return "semisynthetic_distance";
  }
  return "unknown";
}

ScenarioKind scenario_kind_from_string(const std::string& name) {
  for (auto k : {ScenarioKind::ConsecutiveOccurrence, ScenarioKind::OccurrenceDistance, ScenarioKind::OccurrenceWindow,
                 ScenarioKind::SemiSyntheticDistance}) {
    if (to_string(k) == name) {
      return k;
    }
  }
  throw ConfigError("unknown scenario kind '" + name + "'");
}

bool is_distance_scenario(ScenarioKind kind) {
  return kind == ScenarioKind::OccurrenceDistance || kind == ScenarioKind::SemiSyntheticDistance;
}

ScenarioSpec ScenarioSpec::defaults(ScenarioKind kind) {
  ScenarioSpec s;
  s.kind = kind;
  switch (kind) {
    case ScenarioKind::ConsecutiveOccurrence:
      s.code_a = 17;
      s.code_b.reset();
      s.outcome_coef = 10.0;
      break;
    case ScenarioKind::OccurrenceDistance:
      s.code_a = 42;
      s.code_b = 58;
      s.outcome_coef = 40.0;
      break;
    case ScenarioKind::OccurrenceWindow:
      s.code_a = 91;
      s.code_b.reset();
      s.outcome_coef = 10.0;
      break;
    case ScenarioKind::SemiSyntheticDistance:
      s.code_a = 0;
      s.code_b = 1;
      s.outcome_coef = 5.0;
      break;
  }
  return s;
}

void ScenarioSpec::validate(std::size_t dx) const {
  if (!(ps_noise_var > 0.0) || !(outcome_noise_var > 0.0)) {
    throw ConfigError("noise variances must be positive");
  }
  if (!(ps_clamp.lo > 0.0 && ps_clamp.hi < 1.0 && ps_clamp.lo < ps_clamp.hi)) {
    throw ConfigError("ps_clamp must be a sub-interval of (0,1)");
  }
  if (is_distance_scenario(kind) != code_b.has_value()) {
    throw ConfigError("code_b must be set exactly for distance scenarios");
  }
  if (code_b && *code_b == code_a) {
    throw ConfigError("code_a and code_b must differ");
  }
  if (kind == ScenarioKind::OccurrenceWindow && window == 0) {
    throw ConfigError("window must be at least 1");
  }
  for (double v : {base_outcome, outcome_coef, treatment_effect}) {
    if (!std::isfinite(v)) {
      throw ConfigError("scenario coefficients must be finite");
    }
  }
  if (dx != 0) {
    if (code_a >= dx || (code_b && *code_b >= dx)) {
      throw ConfigError("scenario code index out of range for dx=" + std::to_string(dx));
    }
  }
}

std::vector<Code> ScenarioSpec::confounding_codes() const {
  std::vector<Code> codes{code_a};
  if (code_b) {
    codes.push_back(*code_b);
  }
  return codes;
}

DatasetSummary summarize(const ClaimsDataset& data) {
  DatasetSummary s;
  s.size = data.samples.size();
  if (s.size == 0) {
    return s;
  }
  std::size_t records = 0;
  std::size_t codes = 0;
  std::size_t treated = 0;
  for (const auto& sample : data.samples) {
    records += sample.seq.length();
    codes += sample.seq.code_count();
    treated += static_cast<std::size_t>(sample.treatment);
  }
  const auto n = static_cast<double>(s.size);
  s.avg_record_length = static_cast<double>(records) / n;
  s.avg_codes_per_sample = static_cast<double>(codes) / n;
  s.avg_codes_per_record = records == 0 ? 0.0 : static_cast<double>(codes) / static_cast<double>(records);
  s.prevalence_treated = static_cast<double>(treated) / n;
  return s;
}

}  // namespace tdps::claimsgen
