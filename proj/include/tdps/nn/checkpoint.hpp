#pragma once

#include <filesystem>

#include <json.hpp>

#include "tdps/nn/parameter.hpp"

namespace tdps::nn {

// {"<name>": {"shape": [rows, cols], "data": [...]}, ...}. Doubles are
// written in shortest round-trip form, so reload is bit-exact.
nlohmann::json parameters_to_json(const ParameterSet& params);
// Loads values into an existing set; names and shapes must match exactly.
void parameters_from_json(ParameterSet& params, const nlohmann::json& j);

void save_parameters(const ParameterSet& params, const std::filesystem::path& path);
void load_parameters(ParameterSet& params, const std::filesystem::path& path);

}  // namespace tdps::nn
