#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tdps::claimsgen {

using Code = std::uint32_t;
using CodeSet = std::vector<Code>;  // sorted ascending, no duplicates

// Chronologically ordered claims records of one patient.
struct RecordSequence {
  std::vector<CodeSet> records;

  std::size_t length() const { return records.size(); }
  bool contains(std::size_t t, Code code) const;
  std::size_t code_count() const;

  // Throws ContractViolation when a code is >= dx or a record is not a sorted set.
  void validate(std::size_t dx) const;

  bool operator==(const RecordSequence&) const = default;
};

// Sorts and deduplicates a code bag in place.
void canonicalize(CodeSet& codes);

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

struct GeneratorParams {
  std::size_t n_samples = 12000;
  std::size_t dx = 100;
  double poisson_lambda = 10.0;
  Interval static_range{5.0, 10.0};
  Interval dynamic_range{240.0, 260.0};
  std::vector<Code> boosted_codes{3, 17, 42, 58, 91};
  Interval boosted_dynamic_range{40.0, 60.0};
  std::uint64_t seed = 0;

  // Throws ConfigError on inconsistent values.
  void validate() const;
};

enum class ScenarioKind {
  ConsecutiveOccurrence,
  OccurrenceDistance,
  OccurrenceWindow,
  SemiSyntheticDistance,
};

std::string to_string(ScenarioKind kind);
ScenarioKind scenario_kind_from_string(const std::string& name);
bool is_distance_scenario(ScenarioKind kind);

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::OccurrenceDistance;
  Code code_a = 42;
  std::optional<Code> code_b = 58;
  std::size_t window = 3;
  double base_outcome = 10.0;
  double outcome_coef = 40.0;
  double ps_noise_var = 0.01;
  double outcome_noise_var = 0.1;
  double treatment_effect = -5.0;
  Interval ps_clamp{0.01, 0.99};

  // Default coefficients and confounding codes for each scenario.
  static ScenarioSpec defaults(ScenarioKind kind);

  // Throws ConfigError; dx bounds the code indices when non-zero.
  void validate(std::size_t dx = 0) const;

  // Codes whose temporal pattern drives confounding.
  std::vector<Code> confounding_codes() const;
};

struct LabeledSample {
  std::uint64_t id = 0;
  RecordSequence seq;
  double true_ps = 0.5;
  double y0 = 0.0;
  double y1 = 0.0;
  int treatment = 0;
  double outcome = 0.0;
};

struct ClaimsDataset {
  std::size_t dx = 0;
  ScenarioSpec scenario;
  std::uint64_t seed = 0;
  std::optional<GeneratorParams> params;  // present for generated data
  std::vector<std::string> vocabulary;    // present for ingested corpora
  std::vector<LabeledSample> samples;

  std::size_t size() const { return samples.size(); }
};

// Size, sequence length, code density and treated prevalence of a dataset.
struct DatasetSummary {
  std::size_t size = 0;
  double avg_record_length = 0.0;
  double avg_codes_per_sample = 0.0;
  double avg_codes_per_record = 0.0;
  double prevalence_treated = 0.0;
};

DatasetSummary summarize(const ClaimsDataset& data);

}  // namespace tdps::claimsgen
