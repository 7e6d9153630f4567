#include "tdps/cli/commands.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <set>

#include <fmt/format.h>

#include "tdps/claimsgen/corpus.hpp"
#include "tdps/claimsgen/dataset_io.hpp"
#include "tdps/claimsgen/generator.hpp"
#include "tdps/error.hpp"
#include "tdps/models/registry.hpp"
#include "tdps/rng.hpp"

namespace tdps::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) {
    throw ConfigError(where + " must be a JSON object");
  }
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) {
      throw ConfigError(fmt::format("unknown key '{}' in {}", key, where));
    }
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

std::string registry_list() {
  std::string out;
  for (const auto& n : models::registry_names()) {
    out += out.empty() ? n : ", " + n;
  }
  return out;
}

EstimatorEntry parse_estimator(const json& j, const json& global_train) {
  EstimatorEntry e;
  json local_train = json::object();
  if (j.is_string()) {
    e.name = j.get<std::string>();
  } else {
    check_keys(j, {"name", "train", "options"}, "estimator entry");
    e.name = j.at("name").get<std::string>();
    local_train = j.value("train", json::object());
    e.options = j.value("options", json::object());
  }
  if (!models::is_registered(e.name)) {
    throw ConfigError(fmt::format("unknown estimator '{}'; known estimators: {}", e.name, registry_list()));
  }
  models::TrainConfig base;
  base.learning_rate = models::default_learning_rate(e.name);
  e.train = models::train_config_from_json(local_train, models::train_config_from_json(global_train, base));
  return e;
}

DatasetSource parse_dataset(const json& j, const fs::path& base) {
  check_keys(j, {"generate", "path", "corpus"}, "dataset");
  if (j.size() != 1) {
    throw ConfigError("dataset needs exactly one of 'generate', 'path' or 'corpus'");
  }
  DatasetSource d;
  if (j.contains("generate")) {
    const auto& g = j.at("generate");
    check_keys(g, {"generator", "scenario"}, "dataset.generate");
    d.kind = DatasetSource::Kind::Generate;
    d.params = claimsgen::params_from_json(g.value("generator", json::object()));
    d.scenario_json = g.value("scenario", json{{"kind", "occurrence_distance"}});
    d.scenario = claimsgen::scenario_from_json(d.scenario_json);
    d.params.validate();
    d.scenario.validate(d.params.dx);
  } else if (j.contains("path")) {
    d.kind = DatasetSource::Kind::Path;
    d.path = resolve(base, j.at("path").get<std::string>());
  } else {
    const auto& c = j.at("corpus");
    check_keys(c, {"path", "scenario"}, "dataset.corpus");
    d.kind = DatasetSource::Kind::Corpus;
    d.path = resolve(base, c.at("path").get<std::string>());
    d.scenario_json = c.value("scenario", json{{"kind", "semisynthetic_distance"}});
  }
  return d;
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) {
      throw IoError("cannot create directory " + path.parent_path().string());
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) {
    throw IoError("cannot write " + path.string());
  }
  f << text;
  if (!f) {
    throw IoError("write failed for " + path.string());
  }
}

json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) {
    throw IoError("cannot read " + path.string());
  }
  const json j = json::parse(f, nullptr, false);
  if (j.is_discarded()) {
    throw ConfigError("invalid JSON in " + path.string());
  }
  return j;
}

json interval_json(const estimate::Interval95& v) {
  const auto num = [](double x) { return std::isnan(x) ? json(nullptr) : json(x); };
  return {{"mean", num(v.mean)}, {"half_width", num(v.half_width)}};
}

json rows_json(const std::vector<estimate::ReportRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    json metrics = json::object();
    for (const auto& [key, v] : r.metrics) {
      metrics[key] = interval_json(v);
    }
    json row{{"estimator", r.estimator}, {"complete", r.complete}, {"metrics", metrics}};
    if (r.attention) {
      json att = json::object();
      for (const auto& [key, v] : *r.attention) {
        att[key] = interval_json(v);
      }
      row["attention"] = att;
    }
    out.push_back(std::move(row));
  }
  return out;
}

void write_comparison(const fs::path& dir, std::vector<estimate::ReportRow> rows, std::ostream& out) {
  estimate::sort_rows(rows);
  const std::string table = estimate::render_table(rows);
  out << table;
  const json comparison{{"schema_version", estimate::kReportSchemaVersion}, {"rows", rows_json(rows)}};
  write_text(dir / "comparison.json", comparison.dump(2) + "\n");
  write_text(dir / "comparison.txt", table);
}

}  // namespace

ExperimentConfig parse_config(const json& j, const fs::path& base_dir) {
  check_keys(j,
             {"dataset", "estimators", "train", "k", "trim_alpha", "feature_fit", "folds", "output_dir", "seed",
              "threads"},
             "config");
  try {
    ExperimentConfig c;
    c.dataset = parse_dataset(j.value("dataset", json{{"generate", json::object()}}), base_dir);
    const json global_train = j.value("train", json::object());
    for (const auto& e : j.value("estimators", json::array())) {
      c.estimators.push_back(parse_estimator(e, global_train));
    }
    c.k = j.value("k", c.k);
    c.trim_alpha = j.value("trim_alpha", c.trim_alpha);
    c.feature_fit = j.value("feature_fit", c.feature_fit);
    c.folds = j.value("folds", c.folds);
    if (j.contains("output_dir")) {
      c.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
    }
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    if (c.k < 2) {
      throw ConfigError("k must be at least 2");
    }
    if (c.threads < 1) {
      throw ConfigError("threads must be at least 1");
    }
    estimate::TrimSpec{c.trim_alpha, estimate::TrimMode::Trim}.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

ExperimentConfig load_config(const fs::path& path, const Overrides& overrides) {
  ExperimentConfig c = parse_config(read_json(path), path.parent_path());
  if (overrides.seed) {
    c.seed = *overrides.seed;
  }
  if (overrides.out) {
    c.output_dir = *overrides.out;
  }
  if (overrides.threads) {
    if (*overrides.threads < 1) {
      throw ConfigError("--threads must be at least 1");
    }
    c.threads = *overrides.threads;
  }
  return c;
}

claimsgen::ClaimsDataset materialize_dataset(const ExperimentConfig& config) {
  const std::uint64_t seed = derive_seed(config.seed, "dataset");
  const auto& d = config.dataset;
  switch (d.kind) {
    case DatasetSource::Kind::Generate:
      return claimsgen::generate_synthetic(d.params, d.scenario, seed);
    case DatasetSource::Kind::Path:
      return claimsgen::load_dataset(d.path);
    case DatasetSource::Kind::Corpus: {
      const auto corpus = claimsgen::ingest_corpus(d.path);
      json sj = d.scenario_json;
      for (const char* key : {"code_a", "code_b"}) {
        if (sj.contains(key) && sj.at(key).is_string()) {
          const auto name = sj.at(key).get<std::string>();
          const auto idx = corpus.code_index(name);
          if (!idx) {
            throw ConfigError(fmt::format("scenario code '{}' does not occur in the corpus", name));
          }
          sj[key] = *idx;
        }
      }
      return claimsgen::inject_semisynthetic(corpus, claimsgen::scenario_from_json(sj), seed);
    }
  }
  throw ConfigError("unsupported dataset source");
}

std::string render_summary(const claimsgen::DatasetSummary& s) {
  std::string out = fmt::format("{:>8}  {:>14}  {:>16}  {:>16}  {:>13}\n", "Size", "Avg. records", "Avg. codes/sample",
                                "Avg. codes/record", "Prev. treated");
  out += fmt::format("{:>8}  {:>14.2f}  {:>16.2f}  {:>16.2f}  {:>13.3f}\n", s.size, s.avg_record_length,
                     s.avg_codes_per_sample, s.avg_codes_per_record, s.prevalence_treated);
  return out;
}

int report_error(std::ostream& err) {
  try {
    throw;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ScenarioError& e) {
    err << "scenario error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const GenerationError& e) {
    err << "generation error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IngestionError& e) {
    err << "ingestion error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

int cmd_generate(const fs::path& config_path, const Overrides& overrides, std::ostream& out, std::ostream& err) {
  try {
    const auto config = load_config(config_path, overrides);
    if (config.dataset.kind == DatasetSource::Kind::Path) {
      throw ConfigError("dataset source 'path' has nothing to generate");
    }
    const auto data = materialize_dataset(config);
    const fs::path dest = config.output_dir / "dataset.jsonl";
    std::error_code ec;
    fs::create_directories(config.output_dir, ec);
    if (ec) {
      throw IoError("cannot create output directory " + config.output_dir.string());
    }
    claimsgen::save_dataset(data, dest);
    out << render_summary(claimsgen::summarize(data));
    out << "wrote " << dest.string() << '\n';
    return kExitOk;
  } catch (...) {
    return report_error(err);
  }
}

int cmd_run(const fs::path& config_path, const Overrides& overrides, std::ostream& out, std::ostream& err,
            const std::atomic<bool>* cancel) {
  try {
    const auto config = load_config(config_path, overrides);
    if (config.estimators.empty()) {
      throw ConfigError("config lists no estimators");
    }
    const auto data = materialize_dataset(config);
    std::error_code ec;
    fs::create_directories(config.output_dir, ec);
    if (ec) {
      throw IoError("cannot create output directory " + config.output_dir.string());
    }
    if (config.dataset.kind != DatasetSource::Kind::Path) {
      claimsgen::save_dataset(data, config.output_dir / "dataset.jsonl");
    }

    std::vector<estimate::ReportRow> rows;
    bool interrupted = false;
    for (const auto& entry : config.estimators) {
      estimate::CvOptions opt;
      opt.estimator = entry.name;
      opt.estimator_options = entry.options;
      opt.train = entry.train;
      opt.k = config.k;
      opt.trim_alpha = config.trim_alpha;
      opt.seed = config.seed;
      opt.threads = config.threads;
      opt.feature_fit = config.feature_fit;
      opt.only_folds = config.folds;
      opt.cancel = cancel;
      const auto report = estimate::run_cv(data, opt);
      const json j = estimate::to_json(report);
      write_text(config.output_dir / ("report_" + entry.name + ".json"), j.dump(2) + "\n");
      rows.push_back(estimate::row_from_json(j));
      if (!report.complete) {
        interrupted = true;
        break;
      }
    }
    write_comparison(config.output_dir, rows, out);
    if (interrupted) {
      err << "interrupted; partial reports are marked incomplete\n";
      return kExitInterrupted;
    }
    return kExitOk;
  } catch (...) {
    return report_error(err);
  }
}

int cmd_report(const std::vector<fs::path>& reports, const Overrides& overrides, std::ostream& out,
               std::ostream& err) {
  try {
    if (reports.empty()) {
      throw ConfigError("report needs at least one report file");
    }
    std::vector<estimate::ReportRow> rows;
    for (const auto& path : reports) {
      rows.push_back(estimate::row_from_json(read_json(path)));
    }
    const fs::path dir = overrides.out ? *overrides.out : reports.front().parent_path();
    write_comparison(dir.empty() ? fs::path(".") : dir, rows, out);
    return kExitOk;
  } catch (...) {
    return report_error(err);
  }
}

}  // namespace tdps::cli
