#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "tdps/models/estimator.hpp"

namespace tdps::models {

// Names accepted by make_estimator, in display order.
const std::vector<std::string>& registry_names();
bool is_registered(const std::string& name);

// Builds an untrained estimator. `options` may override architecture sizes
// ("hidden_dim", "embed_dim", "model_dim", "layers", "heads", "ff_dim",
// "max_len"). Unknown names throw ConfigError listing the registry.
std::unique_ptr<PropensityEstimator> make_estimator(const std::string& name, std::size_t dx, std::uint64_t seed,
                                                    const nlohmann::json& options = nlohmann::json::object());

// Learning rate used when a config does not set one.
double default_learning_rate(const std::string& name);

}  // namespace tdps::models
