#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gexp::cli {

/// Command-line overrides layered on top of a scenario's defaults and the
/// optional config file (defaults < config section < overrides).
struct RunOptions {
  std::string out_dir = "gexp-out";
  std::optional<std::string> config_file;
  std::optional<std::uint64_t> seed;
  std::optional<int> grid;       // lattice resolution per axis
  std::optional<int> paths;      // Monte Carlo path count
  std::optional<std::vector<int>> n_schedule;
  int threads = 1;
};

/// Builtin scenario catalog, in listing order.
[[nodiscard]] const std::vector<std::string>& scenario_names();

/// Runs one named scenario: writes its report files under out_dir and
/// returns the process exit code — 0 when every assertion passes (for the
/// uniqueness scenario: when the probed hypothesis stands), 1 on assertion
/// failure (or a refuted hypothesis), 2 on an unknown scenario or invalid
/// configuration. Identical inputs produce byte-identical report files.
int run_scenario(const std::string& name, const RunOptions& opt);

}  // namespace gexp::cli
