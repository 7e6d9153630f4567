#include <atomic>
#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "tdps/cli/commands.hpp"

namespace {

std::atomic<bool> g_cancel{false};

extern "C" void on_interrupt(int) {
  g_cancel.store(true);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Propensity score estimation on longitudinal claims data"};
  app.require_subcommand(1);

  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 1;
  std::vector<std::string> reports;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Master seed (overrides the config)");
    sub->add_option("--out", out, "Output directory (overrides the config)");
    sub->add_option("--threads", threads, "Folds trained in parallel")->check(CLI::PositiveNumber);
  };

  auto* gen = app.add_subcommand("generate", "Generate a labeled dataset");
  gen->add_option("--config", config, "Experiment config (JSON)")->required();
  add_common(gen);

  auto* run = app.add_subcommand("run", "Cross-validate the configured estimators");
  run->add_option("--config", config, "Experiment config (JSON)")->required();
  add_common(run);

  auto* rep = app.add_subcommand("report", "Merge report files into one table");
  rep->add_option("reports", reports, "Report JSON files")->required();
  rep->add_option("--out", out, "Directory for comparison.json/.txt");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : tdps::cli::kExitConfig;
  }

  tdps::cli::Overrides overrides;
  for (auto* sub : {gen, run}) {
    if (sub->count("--seed") > 0) {
      overrides.seed = seed;
    }
    if (sub->count("--threads") > 0) {
      overrides.threads = threads;
    }
  }
  for (auto* sub : {gen, run, rep}) {
    if (sub->count("--out") > 0) {
      overrides.out = out;
    }
  }

  if (*gen) {
    return tdps::cli::cmd_generate(config, overrides, std::cout, std::cerr);
  }
  if (*run) {
    std::signal(SIGINT, on_interrupt);
    std::signal(SIGTERM, on_interrupt);
    return tdps::cli::cmd_run(config, overrides, std::cout, std::cerr, &g_cancel);
  }
  std::vector<std::filesystem::path> paths(reports.begin(), reports.end());
  return tdps::cli::cmd_report(paths, overrides, std::cout, std::cerr);
}
