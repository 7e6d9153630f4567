#pragma once

#include <filesystem>

#include <json.hpp>

#include "tdps/claimsgen/types.hpp"

namespace tdps::claimsgen {

// JSON mappings shared by dataset headers and experiment configs. Missing
// fields keep their defaults; unknown scenario kinds raise ConfigError.
nlohmann::json to_json(const GeneratorParams& params);
GeneratorParams params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScenarioSpec& spec);
// Unspecified fields default to ScenarioSpec::defaults(kind).
ScenarioSpec scenario_from_json(const nlohmann::json& j);

nlohmann::json sample_to_json(const LabeledSample& sample);
LabeledSample sample_from_json(const nlohmann::json& j);

// Sidecar path for a dataset file: "x.jsonl" -> "x.header.json".
std::filesystem::path header_path(const std::filesystem::path& dataset_path);

// Writes the JSON Lines samples file and its sidecar header.
void save_dataset(const ClaimsDataset& data, const std::filesystem::path& dataset_path);
ClaimsDataset load_dataset(const std::filesystem::path& dataset_path);

}  // namespace tdps::claimsgen
