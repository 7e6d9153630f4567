#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tdps/claimsgen/types.hpp"

namespace tdps::features {

using claimsgen::ClaimsDataset;
using claimsgen::RecordSequence;

// Row-major N x dx matrix of per-code record counts.
struct CountMatrix {
  std::size_t rows = 0;
  std::size_t dx = 0;
  std::vector<double> counts;

  std::span<const double> row(std::size_t i) const { return {counts.data() + i * dx, dx}; }
};

// Entry k is the number of records containing code k.
std::vector<double> count_features(const RecordSequence& seq, std::size_t dx);

// Count rows for the selected samples (all samples when `indices` is empty);
// rows are filled in parallel.
CountMatrix count_matrix(const ClaimsDataset& data, std::span<const std::size_t> indices = {});
CountMatrix count_matrix_serial(const ClaimsDataset& data, std::span<const std::size_t> indices = {});

struct StandardizerStats {
  std::vector<double> mean;
  std::vector<double> std;  // population form
  std::string fitted_on;
};

// Needs at least two rows.
StandardizerStats fit_standardizer(const CountMatrix& counts, std::string fitted_on = "all");
// (x - mean) / std per code; codes with std == 0 map to 0.
std::vector<double> apply_standardizer(std::span<const double> x, const StandardizerStats& stats);

struct HdpsThresholds {
  std::vector<double> median;
  std::vector<double> p75;
  std::string fitted_on;
};

// Nearest-rank order statistic: value at 1-based index ceil(q * n) of the
// ascending sort.
double nearest_rank(std::vector<double> values, double q);

HdpsThresholds fit_hdps(const CountMatrix& counts, std::string fitted_on = "all");
// Per code k: (count >= 1, count > median_k, count > p75_k); length 3 * dx.
std::vector<double> apply_hdps(std::span<const double> counts, const HdpsThresholds& thresholds);

nlohmann::json to_json(const StandardizerStats& stats);
nlohmann::json to_json(const HdpsThresholds& thresholds);

}  // namespace tdps::features
