#pragma once

#include <atomic>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tdps/claimsgen/types.hpp"
#include "tdps/estimate/metrics.hpp"
#include "tdps/models/estimator.hpp"

namespace tdps::estimate {

inline constexpr int kReportSchemaVersion = 1;

struct AttentionBuckets {
  double confounder = 0.0;
  double other = 0.0;
  double cls = 0.0;
  std::size_t n_confounder = 0;
  std::size_t n_other = 0;
};

// Splits one [CLS] attention row into the [CLS] weight and the mean weights
// of positions whose codes include / exclude a confounding code.
AttentionBuckets attention_buckets(const models::ClsAttention& attention, const std::vector<claimsgen::Code>& codes);

struct AttentionSummary {
  double confounder = 0.0;
  double other = 0.0;
  double cls = 0.0;
  std::size_t samples = 0;
};

// Per-sample bucket means averaged over samples; a sample with an empty
// bucket is skipped for that bucket only.
AttentionSummary attention_summary(const models::PropensityEstimator& model, const claimsgen::ClaimsDataset& data,
                                   std::span<const std::size_t> idx, const claimsgen::ScenarioSpec& spec);

struct CvOptions {
  std::string estimator = "lr";
  nlohmann::json estimator_options = nlohmann::json::object();
  models::TrainConfig train;
  std::size_t k = 10;
  double trim_alpha = 0.05;
  std::uint64_t seed = 0;
  // Fold-level parallelism; 1 runs folds in order on the calling thread.
  int threads = 1;
  // Feature statistics of flat models are fitted on "all" samples or on each
  // fold's "train" part.
  std::string feature_fit = "all";
  // Only these folds are run when non-empty.
  std::vector<std::size_t> only_folds;
  // Polled between folds; when set, remaining folds are skipped and the
  // report is marked incomplete.
  const std::atomic<bool>* cancel = nullptr;
};

struct FoldResult {
  std::size_t fold = 0;
  std::size_t n_train = 0;
  std::size_t n_eval = 0;
  double ps_mae = 0.0;
  double ps_mae_weighted = 0.0;
  double ate_true = 0.0;
  double ate_hat = 0.0;
  double ate_err = 0.0;
  double ate_err_trim = 0.0;
  double ate_err_clip = 0.0;
  std::size_t n_trimmed = 0;
  std::size_t truncated = 0;
  std::optional<AttentionSummary> attention;
  models::TrainLog log;
  nlohmann::json description;  // hyperparameters and fitted feature statistics
};

struct EvaluationReport {
  std::string estimator;
  std::string scenario;
  std::size_t n_samples = 0;
  std::size_t dx = 0;
  std::size_t k = 0;
  double trim_alpha = 0.05;
  std::uint64_t seed = 0;
  std::string config_hash;
  int threads = 1;
  bool complete = true;
  std::vector<FoldResult> folds;
  std::string feature_fit = "all";
  nlohmann::json train_config;
};

EvaluationReport run_cv(const claimsgen::ClaimsDataset& data, const CvOptions& options);

// Hex FNV-1a of the canonical JSON of everything that determines a run.
std::string config_hash(const claimsgen::ClaimsDataset& data, const CvOptions& options);

nlohmann::json to_json(const EvaluationReport& report);

// One table row read back from a report's JSON.
struct ReportRow {
  std::string estimator;
  bool complete = true;
  std::map<std::string, Interval95> metrics;
  std::optional<std::map<std::string, Interval95>> attention;
};

// Throws ConfigError on a schema-version mismatch or missing fields.
ReportRow row_from_json(const nlohmann::json& report);

// Sorted by ps_mae ascending, ties broken by estimator name.
void sort_rows(std::vector<ReportRow>& rows);

// Plain-text table: PS, PS_W, ATE, ATE_T, ATE_C and, when any row has them,
// the three attention columns.
std::string render_table(const std::vector<ReportRow>& rows);

}  // namespace tdps::estimate
