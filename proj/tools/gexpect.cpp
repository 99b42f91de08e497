// Batch front end: runs named verification scenarios and emits CSV tables
// plus pass/fail summaries with reproducible seeds.
#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gexp/scenario.hpp"

namespace {

std::optional<std::vector<int>> parse_schedule(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size()) return std::nullopt;
      out.push_back(v);
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  if (out.empty()) return std::nullopt;
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical checks for sublinear-expectation functionals"};
  app.require_subcommand(1);

  std::string scenario;
  std::string config_file;
  std::string schedule_text;
  gexp::cli::RunOptions opt;
  std::uint64_t seed = 0;
  int grid = 0;
  int paths = 0;

  auto* verify = app.add_subcommand("verify", "run one scenario and write its reports");
  verify->add_option("scenario", scenario, "scenario name (see `list`)")->required();
  verify->add_option("--config", config_file, "key = value config file with [scenario] sections");
  verify->add_option("--seed", seed, "override the scenario seed");
  verify->add_option("--grid", grid, "override the lattice resolution per axis");
  verify->add_option("--paths", paths, "override the Monte Carlo path count");
  verify->add_option("--n-schedule", schedule_text, "override the n schedule, e.g. 4,8,16,32");
  verify->add_option("--out", opt.out_dir, "output directory for all report files");
  verify->add_option("--threads", opt.threads, "worker thread cap for the solvers");

  auto* list = app.add_subcommand("list", "print the scenario catalog");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    app.exit(e);
    return 2;
  }

  if (list->parsed()) {
    for (const auto& name : gexp::cli::scenario_names()) std::cout << name << "\n";
    return 0;
  }

  if (verify->count("--config")) opt.config_file = config_file;
  if (verify->count("--seed")) opt.seed = seed;
  if (verify->count("--grid")) opt.grid = grid;
  if (verify->count("--paths")) opt.paths = paths;
  if (verify->count("--n-schedule")) {
    const auto parsed = parse_schedule(schedule_text);
    if (!parsed) {
      std::cerr << "error: --n-schedule expects a comma-separated integer list\n";
      return 2;
    }
    opt.n_schedule = parsed;
  }

  return gexp::cli::run_scenario(scenario, opt);
}
