#include "tdps/claimsgen/dataset_io.hpp"

#include <fstream>

#include "tdps/error.hpp"

namespace tdps::claimsgen {

using nlohmann::json;

namespace {

json interval_json(const Interval& iv) {
  return json::array({iv.lo, iv.hi});
}

Interval interval_from(const json& j, const char* field) {
  if (!j.is_array() || j.size() != 2) {
    throw ConfigError(std::string(field) + " must be a two-element array");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

template <class T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    out = j.at(key).get<T>();
  }
}

}  // namespace

json to_json(const GeneratorParams& p) {
  return json{{"n_samples", p.n_samples},
              {"dx", p.dx},
              {"poisson_lambda", p.poisson_lambda},
              {"static_range", interval_json(p.static_range)},
              {"dynamic_range", interval_json(p.dynamic_range)},
              {"boosted_codes", p.boosted_codes},
              {"boosted_dynamic_range", interval_json(p.boosted_dynamic_range)},
              {"seed", p.seed}};
}

GeneratorParams params_from_json(const json& j) {
  GeneratorParams p;
  try {
    read_if(j, "n_samples", p.n_samples);
    read_if(j, "dx", p.dx);
    read_if(j, "poisson_lambda", p.poisson_lambda);
    read_if(j, "boosted_codes", p.boosted_codes);
    read_if(j, "seed", p.seed);
    if (j.contains("static_range")) {
      p.static_range = interval_from(j.at("static_range"), "static_range");
    }
    if (j.contains("dynamic_range")) {
      p.dynamic_range = interval_from(j.at("dynamic_range"), "dynamic_range");
    }
    if (j.contains("boosted_dynamic_range")) {
      p.boosted_dynamic_range = interval_from(j.at("boosted_dynamic_range"), "boosted_dynamic_range");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid generator params: ") + e.what());
  }
  return p;
}

json to_json(const ScenarioSpec& s) {
  json j{{"kind", to_string(s.kind)},
         {"code_a", s.code_a},
         {"window", s.window},
         {"base_outcome", s.base_outcome},
         {"outcome_coef", s.outcome_coef},
         {"ps_noise_var", s.ps_noise_var},
         {"outcome_noise_var", s.outcome_noise_var},
         {"treatment_effect", s.treatment_effect},
         {"ps_clamp", interval_json(s.ps_clamp)}};
  j["code_b"] = s.code_b ? json(*s.code_b) : json(nullptr);
  return j;
}

ScenarioSpec scenario_from_json(const json& j) {
  try {
    const auto kind = scenario_kind_from_string(j.at("kind").get<std::string>());
    ScenarioSpec s = ScenarioSpec::defaults(kind);
    read_if(j, "code_a", s.code_a);
    if (j.contains("code_b")) {
      s.code_b = j.at("code_b").is_null() ? std::nullopt : std::optional<Code>(j.at("code_b").get<Code>());
    }
    read_if(j, "window", s.window);
    read_if(j, "base_outcome", s.base_outcome);
    read_if(j, "outcome_coef", s.outcome_coef);
    read_if(j, "ps_noise_var", s.ps_noise_var);
    read_if(j, "outcome_noise_var", s.outcome_noise_var);
    read_if(j, "treatment_effect", s.treatment_effect);
    if (j.contains("ps_clamp")) {
      s.ps_clamp = interval_from(j.at("ps_clamp"), "ps_clamp");
    }
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid scenario spec: ") + e.what());
  }
}

json sample_to_json(const LabeledSample& s) {
  return json{{"id", s.id},           {"records", s.seq.records}, {"treatment", s.treatment}, {"outcome", s.outcome},
              {"true_ps", s.true_ps}, {"y0", s.y0},               {"y1", s.y1}};
}

LabeledSample sample_from_json(const json& j) {
  LabeledSample s;
  s.id = j.at("id").get<std::uint64_t>();
  s.seq.records = j.at("records").get<std::vector<CodeSet>>();
  s.treatment = j.at("treatment").get<int>();
  s.outcome = j.at("outcome").get<double>();
  s.true_ps = j.at("true_ps").get<double>();
  s.y0 = j.at("y0").get<double>();
  s.y1 = j.at("y1").get<double>();
  return s;
}

std::filesystem::path header_path(const std::filesystem::path& dataset_path) {
  auto p = dataset_path;
  p.replace_extension(".header.json");
  return p;
}

void save_dataset(const ClaimsDataset& data, const std::filesystem::path& dataset_path) {
  std::ofstream out(dataset_path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write dataset file " + dataset_path.string());
  }
  for (const auto& s : data.samples) {
    out << sample_to_json(s).dump() << '\n';
  }

  json header{{"format", "tdps-claims-dataset"},
              {"version", 1},
              {"dx", data.dx},
              {"n_samples", data.samples.size()},
              {"seed", data.seed},
              {"scenario", to_json(data.scenario)},
              {"vocabulary", data.vocabulary}};
  header["generator"] = data.params ? to_json(*data.params) : json(nullptr);
  std::ofstream hout(header_path(dataset_path), std::ios::binary);
  if (!hout) {
    throw IoError("cannot write dataset header " + header_path(dataset_path).string());
  }
  hout << header.dump(2) << '\n';
  if (!out || !hout) {
    throw IoError("write failed for " + dataset_path.string());
  }
}

ClaimsDataset load_dataset(const std::filesystem::path& dataset_path) {
  std::ifstream hin(header_path(dataset_path));
  if (!hin) {
    throw IoError("missing dataset header " + header_path(dataset_path).string());
  }
  std::ifstream in(dataset_path);
  if (!in) {
    throw IoError("cannot open dataset file " + dataset_path.string());
  }
  ClaimsDataset data;
  try {
    const json header = json::parse(hin);
    data.dx = header.at("dx").get<std::size_t>();
    data.seed = header.at("seed").get<std::uint64_t>();
    data.scenario = scenario_from_json(header.at("scenario"));
    data.vocabulary = header.value("vocabulary", std::vector<std::string>{});
    if (header.contains("generator") && !header.at("generator").is_null()) {
      data.params = params_from_json(header.at("generator"));
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) {
        continue;
      }
      auto s = sample_from_json(json::parse(line));
      s.seq.validate(data.dx);
      data.samples.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw ConfigError("malformed dataset " + dataset_path.string() + ": " + e.what());
  } catch (const ContractViolation& e) {
    throw ConfigError("invalid dataset " + dataset_path.string() + ": " + e.what());
  }
  return data;
}

}  // namespace tdps::claimsgen
