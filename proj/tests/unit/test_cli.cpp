#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "tdps/cli/commands.hpp"

using namespace tdps;
using namespace tdps::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

fs::path write_json(const fs::path& path, const json& j) {
  std::ofstream(path) << j.dump(2);
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json small_config(const fs::path& out, json estimators) {
  return {{"dataset",
           {{"generate",
             {{"generator", {{"n_samples", 200}}}, {"scenario", {{"kind", "occurrence_distance"}}}}}}},
          {"estimators", std::move(estimators)},
          {"k", 3},
          {"train", {{"max_epochs", 2}}},
          {"output_dir", out.string()},
          {"seed", 11}};
}

}  // namespace

TEST_CASE("generate writes a dataset and creates the output directory") {
  TempDir tmp("tdps_cli_generate");
  const auto cfg = write_json(tmp.path / "c.json", small_config(tmp.path / "nested" / "out", {"oracle"}));
  std::ostringstream out;
  std::ostringstream err;
  CHECK(cmd_generate(cfg, {}, out, err) == kExitOk);
  CHECK(fs::exists(tmp.path / "nested" / "out" / "dataset.jsonl"));
  CHECK(fs::exists(tmp.path / "nested" / "out" / "dataset.header.json"));
  CHECK(out.str().find("Prev. treated") != std::string::npos);
  const auto first = slurp(tmp.path / "nested" / "out" / "dataset.jsonl");
  CHECK(cmd_generate(cfg, {}, out, err) == kExitOk);
  CHECK(slurp(tmp.path / "nested" / "out" / "dataset.jsonl") == first);
}

TEST_CASE("run writes reports and a comparison table") {
  TempDir tmp("tdps_cli_run");
  const auto cfg = write_json(tmp.path / "c.json", small_config(tmp.path / "out", {"oracle", "lr"}));
  std::ostringstream out;
  std::ostringstream err;
  REQUIRE(cmd_run(cfg, {}, out, err) == kExitOk);
  const auto oracle = json::parse(slurp(tmp.path / "out" / "report_oracle.json"));
  CHECK(oracle["aggregate"]["ps_mae"]["mean"].get<double>() == 0.0);
  CHECK(oracle["folds"].size() == 3);
  CHECK(fs::exists(tmp.path / "out" / "report_lr.json"));
  const auto table = slurp(tmp.path / "out" / "comparison.txt");
  CHECK(table.find("oracle") < table.find("lr "));
  CHECK(table.find("ATE_C") != std::string::npos);

  std::ostringstream rout;
  Overrides merged;
  merged.out = tmp.path / "merged";
  CHECK(cmd_report({tmp.path / "out" / "report_lr.json"}, merged, rout, err) == kExitOk);
  CHECK(fs::exists(tmp.path / "merged" / "comparison.json"));
  CHECK(rout.str().find("lr") != std::string::npos);
}

TEST_CASE("overrides replace config values") {
  TempDir tmp("tdps_cli_override");
  const auto cfg = write_json(tmp.path / "c.json", small_config(tmp.path / "out", {"oracle"}));
  Overrides o;
  o.seed = 5;
  o.out = tmp.path / "elsewhere";
  o.threads = 2;
  const auto c = load_config(cfg, o);
  CHECK(c.seed == 5);
  CHECK(c.output_dir == tmp.path / "elsewhere");
  CHECK(c.threads == 2);
}

TEST_CASE("exit codes") {
  TempDir tmp("tdps_cli_exit");
  std::ostringstream out;
  std::ostringstream err;

  const auto unknown = write_json(tmp.path / "u.json", small_config(tmp.path / "out", {"svm"}));
  CHECK(cmd_run(unknown, {}, out, err) == kExitConfig);
  CHECK(err.str().find("bert-code") != std::string::npos);

  auto extra = small_config(tmp.path / "out", {"lr"});
  extra["epochs"] = 3;
  CHECK(cmd_run(write_json(tmp.path / "x.json", extra), {}, out, err) == kExitConfig);

  std::ofstream(tmp.path / "bad.json") << "{ not json";
  CHECK(cmd_run(tmp.path / "bad.json", {}, out, err) == kExitConfig);

  CHECK(cmd_run(tmp.path / "missing.json", {}, out, err) == kExitIo);

  auto missing_data = small_config(tmp.path / "out", {"lr"});
  missing_data["dataset"] = {{"path", (tmp.path / "nope.jsonl").string()}};
  CHECK(cmd_run(write_json(tmp.path / "m.json", missing_data), {}, out, err) == kExitIo);

  auto bad_scenario = small_config(tmp.path / "out", {"lr"});
  bad_scenario["dataset"]["generate"]["scenario"]["kind"] = "sideways";
  CHECK(cmd_generate(write_json(tmp.path / "s.json", bad_scenario), {}, out, err) == kExitConfig);

  auto old = json{{"schema_version", 0}, {"estimator", "lr"}};
  CHECK(cmd_report({write_json(tmp.path / "old.json", old)}, {}, out, err) == kExitConfig);
}

TEST_CASE("interrupted runs write incomplete reports") {
  TempDir tmp("tdps_cli_cancel");
  const auto cfg = write_json(tmp.path / "c.json", small_config(tmp.path / "out", {"constant"}));
  std::atomic<bool> cancel{true};
  std::ostringstream out;
  std::ostringstream err;
  CHECK(cmd_run(cfg, {}, out, err, &cancel) == kExitInterrupted);
  const auto report = json::parse(slurp(tmp.path / "out" / "report_constant.json"));
  CHECK(report["complete"] == false);
}

TEST_CASE("single-threaded runs are byte-identical") {
  TempDir tmp("tdps_cli_determinism");
  const auto a = write_json(tmp.path / "a.json", small_config(tmp.path / "a", {"lr", "constant"}));
  const auto b = write_json(tmp.path / "b.json", small_config(tmp.path / "b", {"lr", "constant"}));
  std::ostringstream out;
  std::ostringstream err;
  REQUIRE(cmd_run(a, {}, out, err) == kExitOk);
  REQUIRE(cmd_run(b, {}, out, err) == kExitOk);
  for (const auto* f : {"dataset.jsonl", "report_lr.json", "report_constant.json", "comparison.txt"}) {
    CAPTURE(f);
    CHECK(slurp(tmp.path / "a" / f) == slurp(tmp.path / "b" / f));
  }
}
