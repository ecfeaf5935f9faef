// mxl run|verify|sweep <config> --out <dir> [--seed N] [--quiet]

#include "mxl/mxl.h"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

namespace {

int execute(const std::string& config, const std::string& out, std::optional<std::uint64_t> seed, bool quiet,
            mxl_command command) {
  mxl_scenario* scenario = nullptr;
  if (mxl_scenario_load(config.c_str(), &scenario) != MXL_OK) {
    std::cerr << "error: " << mxl_last_error() << '\n';
    return 1;
  }
  if (seed && mxl_scenario_set_seed(scenario, *seed) != MXL_OK) {
    std::cerr << "error: " << mxl_last_error() << '\n';
    mxl_scenario_free(scenario);
    return 1;
  }
  int code = 1;
  const mxl_status s = mxl_scenario_execute(scenario, command, out.c_str(), quiet ? 1 : 0, &code);
  if (s != MXL_OK) {
    std::cerr << "error: " << mxl_last_error() << '\n';
    code = 1;
  } else if (code == 1) {
    std::cerr << "error: " << mxl_last_error() << '\n';
  }
  mxl_scenario_free(scenario);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Matrix exponential learning for concave games on spectrahedra"};
  app.set_version_flag("--version", std::string(mxl_version()));
  app.require_subcommand(1);

  std::string config, out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
  mxl_command command = MXL_CMD_RUN;

  auto add = [&](const char* name, const char* help, mxl_command cmd) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("config", config, "Scenario file (YAML)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "Output directory")->required();
    sub->add_option("--seed", seed, "Override solver.seed");
    sub->add_flag("--quiet", quiet, "Suppress progress output");
    sub->callback([&command, cmd] { command = cmd; });
  };
  add("run", "Run the solver and write trace.csv, summary.json and plot data", MXL_CMD_RUN);
  add("verify", "Run a stability or rate check and write report.json", MXL_CMD_VERIFY);
  add("sweep", "Run a parameter grid and write sweep.csv", MXL_CMD_SWEEP);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  return execute(config, out, seed, quiet, command);
}
