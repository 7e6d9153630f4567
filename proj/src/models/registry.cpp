#include "tdps/models/registry.hpp"

#include <algorithm>

#include "tdps/error.hpp"
#include "tdps/models/baselines.hpp"
#include "tdps/models/bert.hpp"
#include "tdps/models/flat.hpp"
#include "tdps/models/sequence.hpp"

namespace tdps::models {

namespace {

std::size_t option(const nlohmann::json& options, const char* key, std::size_t fallback) {
  if (!options.contains(key)) {
    return fallback;
  }
  const auto& v = options.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() <= 0) {
    throw ConfigError(std::string("estimator option '") + key + "' must be a positive integer");
  }
  return v.get<std::size_t>();
}

std::string joined_names() {
  std::string out;
  for (const auto& n : registry_names()) {
    out += out.empty() ? n : ", " + n;
  }
  return out;
}

}  // namespace

const std::vector<std::string>& registry_names() {
  static const std::vector<std::string> names{"lr",   "lr-hdps",   "mlp",         "mlp-hdps", "lstm",
                                              "bert-code", "bert-record", "oracle", "constant"};
  return names;
}

bool is_registered(const std::string& name) {
  const auto& names = registry_names();
  return std::find(names.begin(), names.end(), name) != names.end() || name == "mlp-embed";
}

std::unique_ptr<PropensityEstimator> make_estimator(const std::string& name, std::size_t dx, std::uint64_t seed,
                                                    const nlohmann::json& options) {
  if (dx == 0) {
    throw ConfigError("vocabulary size must be positive");
  }
  if (!options.is_object()) {
    throw ConfigError("estimator options must be a JSON object");
  }
  if (name == "lr" || name == "lr-hdps") {
    return std::make_unique<LogisticRegression>(name == "lr" ? FeatureMode::Counts : FeatureMode::Hdps, dx, seed);
  }
  if (name == "mlp" || name == "mlp-hdps") {
    return std::make_unique<Mlp>(name == "mlp" ? FeatureMode::Counts : FeatureMode::Hdps, dx, seed,
                                 option(options, "hidden_dim", 64));
  }
  if (name == "mlp-embed") {
    return std::make_unique<EmbeddingBagMlp>(dx, seed, option(options, "embed_dim", 64),
                                             option(options, "hidden_dim", 64));
  }
  if (name == "lstm") {
    LstmConfig c;
    c.embed_dim = option(options, "embed_dim", c.embed_dim);
    c.hidden_dim = option(options, "hidden_dim", c.hidden_dim);
    c.layers = option(options, "layers", c.layers);
    return std::make_unique<LstmEstimator>(dx, seed, c);
  }
  if (name == "bert-code" || name == "bert-record") {
    BertConfig c;
    c.dim = option(options, "model_dim", c.dim);
    c.layers = option(options, "layers", c.layers);
    c.heads = option(options, "heads", c.heads);
    c.ff_dim = option(options, "ff_dim", c.ff_dim);
    c.max_len = option(options, "max_len", c.max_len);
    if (c.dim % c.heads != 0 || c.dim % 2 != 0 || c.max_len < 2) {
      throw ConfigError("transformer options: model_dim must be even and divisible by heads; max_len >= 2");
    }
    return std::make_unique<BertEstimator>(name == "bert-code" ? TokenLevel::Code : TokenLevel::Record, dx, seed, c);
  }
  if (name == "oracle") {
    return std::make_unique<OracleEstimator>();
  }
  if (name == "constant") {
    return std::make_unique<ConstantEstimator>();
  }
  throw ConfigError("unknown estimator '" + name + "'; known estimators: " + joined_names());
}

double default_learning_rate(const std::string& name) {
  if (name == "lr" || name == "lr-hdps") {
    return 1e-3;
  }
  if (name == "mlp" || name == "mlp-hdps" || name == "mlp-embed") {
    return 1e-4;
  }
  return 1e-5;
}

}  // namespace tdps::models
