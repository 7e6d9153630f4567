#include "tdps/nn/checkpoint.hpp"

#include <fstream>

#include "tdps/error.hpp"

namespace tdps::nn {

using nlohmann::json;

json parameters_to_json(const ParameterSet& params) {
  json j = json::object();
  for (const auto& p : params) {
    j[p.name] = json{{"shape", {p.value.rows, p.value.cols}}, {"data", p.value.data}};
  }
  return j;
}

void parameters_from_json(ParameterSet& params, const json& j) {
  if (!j.is_object() || j.size() != params.size()) {
    throw ConfigError("checkpoint does not match the model's parameter count");
  }
  for (auto& p : params) {
    if (!j.contains(p.name)) {
      throw ConfigError("checkpoint is missing parameter " + p.name);
    }
    const auto& entry = j.at(p.name);
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    auto data = entry.at("data").get<std::vector<double>>();
    if (shape.size() != 2 || shape[0] != p.value.rows || shape[1] != p.value.cols || data.size() != p.value.size()) {
      throw ConfigError("checkpoint shape mismatch for " + p.name);
    }
    p.value.data = std::move(data);
  }
}

void save_parameters(const ParameterSet& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write checkpoint " + path.string());
  }
  out << parameters_to_json(params).dump() << '\n';
}

void load_parameters(ParameterSet& params, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot read checkpoint " + path.string());
  }
  try {
    parameters_from_json(params, json::parse(in));
  } catch (const json::exception& e) {
    throw ConfigError("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace tdps::nn
