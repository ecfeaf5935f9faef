#pragma once

// Scenario files: a YAML document with game, solver, async and experiment
// sections, validated up front and executed as run, verify or sweep.

#include "mxl/games.hpp"
#include "mxl/solver.hpp"
#include "mxl/verify.hpp"

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace mxl {

struct GameSpec {
  std::string kind;  // mac | ee | metric | linear | two_equilibrium
  // mac
  int players = 2;
  std::string utility = "quadratic";
  double b = 1.0, c = 2.0, a = 1.0;
  // ee
  int users = 2, tx_antennas = 2, rx_antennas = 2, subcarriers = 2;
  double pathloss_spread_db = 10.0, cross_attenuation_db = 0.0;
  PowerParams power;
  // metric
  int dim = 5, clusters = 2, points_per_cluster = 20;
  double separation = 3.0;
  MetricParams metric;
  // linear
  std::vector<double> cost{1.0, 0.25};
  double trace_bound = 1.0;
  // two_equilibrium
  double base = 0.2, curvature = 0.8;
  // shared
  std::uint64_t seed = 1;
  std::string fixture;  // resolved path, empty when generated
};

struct ScheduleSpec {
  StepSchedule schedule;
  bool auto_strength = false;  // optimized schedule with B estimated from the game
};

struct NoiseSpec {
  NoiseModel model;
  bool calibrated = false;  // gaussian sigma = level * ||V(X(0))||_F
};

struct ExperimentSpec {
  std::string mode = "run";  // run | rate | stability | sweep
  int seeds = 10;
  std::vector<long> checkpoints{100, 316, 1000, 3162, 10000};
  RateMetric metric = RateMetric::kNuclearDistance;
  std::optional<double> expected_slope;   // auto when empty
  std::optional<double> slope_tolerance;  // auto when empty
  bool bound_check = false;
  int samples = 10000;
  double radius = 0.2;
  std::vector<std::string> checks{"monotonicity", "variational_stability", "hessian"};
  int strength_samples = 10000;
  std::string sweep_parameter;
  std::vector<YAML::Node> sweep_values;
};

struct ScenarioConfig {
  std::string origin;  // file name used in diagnostics
  YAML::Node root;     // the parsed document, kept for sweep overrides
  GameSpec game;
  ScheduleSpec schedule;
  NoiseSpec noise;
  long max_iters = 10000;
  double stop_residual = 1e-6;
  long log_every = 1;
  std::uint64_t seed = 1;
  std::string start = "uniform";   // uniform | baseline
  std::string reference = "none";  // none | oracle
  bool stochastic_oracle = true;
  std::optional<AsyncSchedule> async;
  ExperimentSpec experiment;
};

/// Parses and validates; throws ConfigError with "origin:line:col: message".
ScenarioConfig load_scenario_file(const std::filesystem::path& path);
ScenarioConfig load_scenario_string(const std::string& text, const std::string& origin,
                                    const std::filesystem::path& base_dir = ".");

/// Replaces the solver seed (and the master seed of multi-seed experiments).
void set_seed(ScenarioConfig& config, std::uint64_t seed);

std::unique_ptr<GameModel> build_game(const GameSpec& spec);

/// Fully resolved configuration, defaults included.
nlohmann::json config_to_json(const ScenarioConfig& config);

enum class Command { kRun, kVerify, kSweep };

struct CommandResult {
  int exit_code = 0;  // 0 ok, 1 error, 2 not converged, 3 verification failed
  std::string message;
};

/// Executes a validated scenario and writes its outputs under out_dir. Progress lines
/// go to `log` when non-null. Mode mismatches and runtime errors give exit code 1.
CommandResult execute(const ScenarioConfig& config, Command command,
                      const std::filesystem::path& out_dir, std::ostream* log = nullptr);

}  // namespace mxl
