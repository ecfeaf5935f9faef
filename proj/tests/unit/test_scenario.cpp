#include "doctest.h"

#include "mxl/errors.hpp"
#include "mxl/scenario.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace mxl;
namespace fs = std::filesystem;

namespace {

const char* kMac = R"(game:
  kind: mac
  players: 2
  utility: quadratic
solver:
  schedule: {kind: power_law, gamma0: 1.0, exponent: 0.5}
  max_iters: 2000
  stop_residual: 1.0e-6
  reference: oracle
)";

std::string error_of(const std::string& text) {
  try {
    load_scenario_string(text, "case.cfg");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mxl_scenario_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("defaults are resolved and echoed") {
  const ScenarioConfig c = load_scenario_string("game: {kind: mac}\n", "min.cfg");
  CHECK(c.game.players == 2);
  CHECK(c.max_iters == 10000);
  CHECK(c.stop_residual == 1e-6);
  CHECK(c.experiment.mode == "run");
  const nlohmann::json j = config_to_json(c);
  CHECK(j["game"]["kind"] == "mac");
  CHECK(j["game"]["b"] == 1.0);
  CHECK(j["game"]["c"] == 2.0);
  CHECK(j["solver"]["max_iters"] == 10000);
  CHECK(j["solver"]["schedule"]["kind"] == "power_law");
  CHECK(j["solver"]["noise"]["kind"] == "none");
}

TEST_CASE("parse errors carry file, line and column") {
  const std::string bad_yaml = error_of("game:\n  kind: mac\n  players: [1, 2\n");
  CHECK(bad_yaml.rfind("case.cfg:", 0) == 0);
  CHECK(bad_yaml.find("case.cfg:4:") != std::string::npos);

  const std::string unknown = error_of("game:\n  kind: mac\n  playerz: 3\n");
  CHECK(unknown.find("case.cfg:3:3:") != std::string::npos);
  CHECK(unknown.find("playerz") != std::string::npos);

  const std::string unknown_top = error_of("game: {kind: mac}\nsolvr: {}\n");
  CHECK(unknown_top.find("case.cfg:2:1:") != std::string::npos);

  const std::string bad_kind = error_of("game:\n  kind: chess\n");
  CHECK(bad_kind.find("case.cfg:2:") != std::string::npos);
  CHECK(bad_kind.find("mac") != std::string::npos);

  const std::string bad_type = error_of("game:\n  kind: mac\n  players: two\n");
  CHECK(bad_type.find("case.cfg:3:") != std::string::npos);

  CHECK(error_of("solver: {max_iters: 10}\n").find("game") != std::string::npos);
  CHECK_FALSE(error_of("game: {kind: mac}\nsolver: {max_iters: 0}\n").empty());
  CHECK_FALSE(error_of("game: {kind: mac}\nsolver: {noise: {kind: pareto, tail_index: 1.0}}\n").empty());
  CHECK_FALSE(error_of("game: {kind: mac}\nsolver: {start: baseline}\n").empty());
  CHECK_THROWS_AS(load_scenario_file("/nonexistent/scenario.cfg"), ConfigError);
}

TEST_CASE("sweep values are validated up front") {
  const std::string head = "game: {kind: mac}\nexperiment:\n  mode: sweep\n  seeds: 2\n  sweep:\n";
  CHECK(error_of(head + "    parameter: solver.max_iters\n    values: []\n").find("non-empty") !=
        std::string::npos);
  CHECK_FALSE(error_of(head + "    parameter: solver.max_iters\n    values: [10, -1]\n").empty());
  CHECK_FALSE(error_of(head + "    parameter: banana\n    values: [1]\n").empty());
  CHECK(error_of(head + "    parameter: solver.max_iters\n    values: [10, 20]\n").empty());
}

TEST_CASE("seed override") {
  ScenarioConfig c = load_scenario_string(kMac, "mac.cfg");
  CHECK(c.seed == 1);
  set_seed(c, 77);
  CHECK(c.seed == 77);
  CHECK(config_to_json(c)["solver"]["seed"] == 77);
}

TEST_CASE("run writes deterministic outputs") {
  const ScenarioConfig c = load_scenario_string(kMac, "mac.cfg");
  const fs::path a = fresh_dir("run_a"), b = fresh_dir("run_b");
  const CommandResult ra = execute(c, Command::kRun, a);
  const CommandResult rb = execute(c, Command::kRun, b);
  CHECK(ra.exit_code == 0);
  CHECK(rb.exit_code == 0);
  for (const char* f : {"trace.csv", "utility.csv", "residual.csv", "summary.json"}) {
    REQUIRE(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const nlohmann::json s = nlohmann::json::parse(slurp(a / "summary.json"));
  CHECK(s["status"] == "converged");
  CHECK(s["terminal"]["nash_residual"].get<double>() < 1e-6);
  CHECK(s["config"]["game"]["kind"] == "mac");
  const std::string trace = slurp(a / "trace.csv");
  CHECK(trace.rfind("n,", 0) == 0);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("run exit codes") {
  ScenarioConfig c = load_scenario_string(
      "game: {kind: mac}\nsolver: {max_iters: 3, stop_residual: 1.0e-12}\n", "short.cfg");
  const fs::path out = fresh_dir("short");
  CHECK(execute(c, Command::kRun, out).exit_code == 2);
  fs::remove_all(out);

  // Wrong command for the experiment mode: exit 1 and nothing written.
  const fs::path none = fresh_dir("none");
  const CommandResult r = execute(c, Command::kSweep, none);
  CHECK(r.exit_code == 1);
  CHECK(r.message.find("sweep") != std::string::npos);
  CHECK(execute(c, Command::kVerify, none).exit_code == 1);
  CHECK_FALSE(fs::exists(none));
}

TEST_CASE("sweep writes one cell per value") {
  const ScenarioConfig c = load_scenario_string(R"(game: {kind: mac}
solver:
  max_iters: 500
  stop_residual: 1.0e-4
experiment:
  mode: sweep
  seeds: 3
  sweep:
    parameter: solver.schedule.gamma0
    values: [0.5, 1.0]
)",
                                                "sweep.cfg");
  const fs::path out = fresh_dir("sweep");
  const CommandResult r = execute(c, Command::kSweep, out);
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(out / "sweep.csv"));
  CHECK(fs::exists(out / "cells" / "cell_0.json"));
  CHECK(fs::exists(out / "cells" / "cell_1.json"));
  CHECK_FALSE(fs::exists(out / "cells" / "cell_2.json"));
  const nlohmann::json s = nlohmann::json::parse(slurp(out / "summary.json"));
  CHECK(s["cells"].size() == 2);
  fs::remove_all(out);
}

TEST_CASE("stability verification") {
  const ScenarioConfig c = load_scenario_string(R"(game: {kind: mac}
experiment:
  mode: stability
  samples: 500
  radius: 0.2
  strength_samples: 500
)",
                                                "stab.cfg");
  const fs::path out = fresh_dir("stab");
  CHECK(execute(c, Command::kVerify, out).exit_code == 0);
  CHECK(fs::exists(out / "report.json"));
  fs::remove_all(out);
}

TEST_CASE("game construction from specs") {
  GameSpec s;
  s.kind = "linear";
  s.cost = {1.0, 0.25, -1.0};
  CHECK(build_game(s)->domain(0).dim() == 3);
  s.kind = "ee";
  CHECK(build_game(s)->num_players() == 2);
  s.kind = "metric";
  CHECK(build_game(s)->domain(0).dim() == 5);
  s.kind = "two_equilibrium";
  CHECK(build_game(s)->num_players() == 2);
}
