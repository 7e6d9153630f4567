#pragma once

#include <atomic>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tdps/claimsgen/types.hpp"
#include "tdps/estimate/cv.hpp"

namespace tdps::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitIo = 3,
  kExitInterrupted = 130,
};

// Command-line values that override the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<int> threads;
};

struct DatasetSource {
  enum class Kind { Generate, Path, Corpus } kind = Kind::Generate;
  claimsgen::GeneratorParams params;
  claimsgen::ScenarioSpec scenario;
  nlohmann::json scenario_json;  // kept raw so corpus code names resolve later
  std::filesystem::path path;
};

struct EstimatorEntry {
  std::string name;
  models::TrainConfig train;
  nlohmann::json options = nlohmann::json::object();
};

struct ExperimentConfig {
  DatasetSource dataset;
  std::vector<EstimatorEntry> estimators;
  std::size_t k = 10;
  double trim_alpha = 0.05;
  std::string feature_fit = "all";
  std::vector<std::size_t> folds;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;
  int threads = 1;
};

// Relative paths in the config resolve against `base_dir`. Throws ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path, const Overrides& overrides = {});

// Builds or loads the dataset described by the config. The generator and
// corpus injection draw from derive_seed(seed, "dataset").
claimsgen::ClaimsDataset materialize_dataset(const ExperimentConfig& config);

// Summary line block in the layout of a dataset statistics table.
std::string render_summary(const claimsgen::DatasetSummary& summary);

// Subcommands. Each returns an exit code and reports errors on `err`.
int cmd_generate(const std::filesystem::path& config_path, const Overrides& overrides, std::ostream& out,
                 std::ostream& err);
int cmd_run(const std::filesystem::path& config_path, const Overrides& overrides, std::ostream& out,
            std::ostream& err, const std::atomic<bool>* cancel = nullptr);
int cmd_report(const std::vector<std::filesystem::path>& reports, const Overrides& overrides, std::ostream& out,
               std::ostream& err);

// Maps an exception to its exit code and prints it.
int report_error(std::ostream& err);

}  // namespace tdps::cli
