#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tdps::estimate {

// One evaluated sample: treatment, observed outcome, estimated propensity.
struct Unit {
  int treatment = 0;
  double outcome = 0.0;
  double ps = 0.5;
};

// (1/N) (sum A Y / e - sum (1 - A) Y / (1 - e)). Throws EvaluationError when
// some e is exactly 0 or 1 (clip mode handles those).
double iptw_ate(std::span<const Unit> units);

// Mean absolute error and its true-score-weighted variant (1/M) sum e |e - e^|.
double ps_mae(std::span<const double> e, std::span<const double> e_hat);
double ps_mae_weighted(std::span<const double> e, std::span<const double> e_hat);

enum class TrimMode { None, Trim, Clip };

std::string to_string(TrimMode mode);
TrimMode trim_mode_from_string(const std::string& name);

struct TrimSpec {
  double alpha = 0.05;
  TrimMode mode = TrimMode::None;

  // Throws ConfigError unless alpha lies in (0, 0.5).
  void validate() const;
};

struct AteError {
  double error = 0.0;
  double ate = 0.0;
  std::size_t n_used = 0;
};

// |ATE - true ATE| under the chosen adjustment. Trim keeps units with
// e in [alpha, 1 - alpha] and divides by the retained count; clip clamps e
// into that range. Throws EvaluationError if trimming empties an arm.
AteError ate_error(std::span<const Unit> units, double ate_true, const TrimSpec& trim);

// Indices of units kept by symmetric trimming.
std::vector<std::size_t> trimmed_indices(std::span<const Unit> units, double alpha);

// Shuffled partition of 0..n-1 into k folds whose sizes differ by at most 1.
// Each fold is sorted ascending.
std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed);

struct Interval95 {
  double mean = 0.0;
  double half_width = 0.0;
};

// Mean and t-based 95% half-width with k - 1 degrees of freedom.
Interval95 ci95(std::span<const double> values);

}  // namespace tdps::estimate
