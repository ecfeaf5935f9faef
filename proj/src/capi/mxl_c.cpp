#include "mxl/mxl.h"

#include "mxl/errors.hpp"
#include "mxl/scenario.hpp"

#include <iostream>
#include <memory>
#include <string>

struct mxl_scenario {
  mxl::ScenarioConfig config;
  std::string json;
};

struct mxl_game {
  std::unique_ptr<mxl::GameModel> model;
};

struct mxl_result {
  mxl::RunTrace trace;
  mutable std::string csv;
};

namespace {

thread_local std::string g_last_error;

mxl_status fail(mxl_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

// Maps the library's exception hierarchy onto status codes.
template <typename F>
mxl_status guarded(F&& f) {
  try {
    return f();
  } catch (const mxl::ConfigError& e) {
    return fail(MXL_ERR_CONFIG, e.what());
  } catch (const mxl::ShapeError& e) {
    return fail(MXL_ERR_ARGUMENT, e.what());
  } catch (const mxl::DomainError& e) {
    return fail(MXL_ERR_DOMAIN, e.what());
  } catch (const mxl::NumericError& e) {
    return fail(MXL_ERR_NUMERIC, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(MXL_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(MXL_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(MXL_ERR_INTERNAL, "unknown error");
  }
}

#define MXL_REQUIRE(cond, what) \
  if (!(cond)) return fail(MXL_ERR_ARGUMENT, what)

}  // namespace

extern "C" {

const char* mxl_version(void) { return "1.0.0"; }

const char* mxl_last_error(void) { return g_last_error.c_str(); }

const char* mxl_status_name(mxl_status status) {
  switch (status) {
    case MXL_OK: return "ok";
    case MXL_ERR_ARGUMENT: return "argument error";
    case MXL_ERR_CONFIG: return "configuration error";
    case MXL_ERR_DOMAIN: return "domain error";
    case MXL_ERR_NUMERIC: return "numeric error";
    case MXL_ERR_IO: return "i/o error";
    case MXL_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

mxl_status mxl_scenario_load(const char* path, mxl_scenario** out) {
  MXL_REQUIRE(path && out, "mxl_scenario_load: null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new mxl_scenario{mxl::load_scenario_file(path), {}};
    return MXL_OK;
  });
}

mxl_status mxl_scenario_load_string(const char* text, const char* origin, mxl_scenario** out) {
  MXL_REQUIRE(text && out, "mxl_scenario_load_string: null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new mxl_scenario{mxl::load_scenario_string(text, origin ? origin : "<string>"), {}};
    return MXL_OK;
  });
}

mxl_status mxl_scenario_set_seed(mxl_scenario* scenario, uint64_t seed) {
  MXL_REQUIRE(scenario, "mxl_scenario_set_seed: null scenario");
  return guarded([&] {
    mxl::set_seed(scenario->config, seed);
    return MXL_OK;
  });
}

mxl_status mxl_scenario_execute(const mxl_scenario* scenario, mxl_command command, const char* out_dir,
                                int quiet, int* exit_code) {
  MXL_REQUIRE(scenario && out_dir && exit_code, "mxl_scenario_execute: null argument");
  MXL_REQUIRE(command >= MXL_CMD_RUN && command <= MXL_CMD_SWEEP, "mxl_scenario_execute: unknown command");
  return guarded([&] {
    const auto cmd = command == MXL_CMD_RUN      ? mxl::Command::kRun
                     : command == MXL_CMD_VERIFY ? mxl::Command::kVerify
                                                 : mxl::Command::kSweep;
    const mxl::CommandResult r = mxl::execute(scenario->config, cmd, out_dir, quiet ? nullptr : &std::cerr);
    *exit_code = r.exit_code;
    g_last_error = r.exit_code == 0 ? std::string() : r.message;
    return MXL_OK;
  });
}

mxl_status mxl_scenario_config_json(mxl_scenario* scenario, const char** json) {
  MXL_REQUIRE(scenario && json, "mxl_scenario_config_json: null argument");
  return guarded([&] {
    scenario->json = mxl::config_to_json(scenario->config).dump(2);
    *json = scenario->json.c_str();
    return MXL_OK;
  });
}

void mxl_scenario_free(mxl_scenario* scenario) { delete scenario; }

mxl_status mxl_game_mac_quadratic(int players, double b, double c, mxl_game** out) {
  MXL_REQUIRE(out, "mxl_game_mac_quadratic: null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new mxl_game{std::make_unique<mxl::MacGame>(players, mxl::MacUtility::quadratic(b, c))};
    return MXL_OK;
  });
}

mxl_status mxl_game_linear(int dim, const double* eigenvalues, double trace_bound, mxl_game** out) {
  MXL_REQUIRE(out && eigenvalues && dim > 0, "mxl_game_linear: invalid argument");
  *out = nullptr;
  return guarded([&] {
    if (!(trace_bound > 0.0)) throw mxl::ConfigError("mxl_game_linear: trace_bound must be > 0");
    const mxl::RVector d = Eigen::Map<const mxl::RVector>(eigenvalues, dim);
    *out = new mxl_game{std::make_unique<mxl::LinearGame>(mxl::HermitianMatrix::diagonal(d), trace_bound)};
    return MXL_OK;
  });
}

mxl_status mxl_game_ee(int users, int tx_antennas, int rx_antennas, int subcarriers, double pathloss_spread_db,
                       double cross_attenuation_db, double p_max, double p_circuit, uint64_t seed, mxl_game** out) {
  MXL_REQUIRE(out, "mxl_game_ee: null argument");
  *out = nullptr;
  return guarded([&] {
    auto ch = mxl::synth_channels(users, tx_antennas, rx_antennas, subcarriers, pathloss_spread_db, seed,
                                  cross_attenuation_db);
    *out = new mxl_game{std::make_unique<mxl::EeGame>(std::move(ch), mxl::PowerParams{p_max, p_circuit})};
    return MXL_OK;
  });
}

mxl_status mxl_game_num_players(const mxl_game* game, int* players) {
  MXL_REQUIRE(game && players, "mxl_game_num_players: null argument");
  *players = game->model->num_players();
  return MXL_OK;
}

mxl_status mxl_game_player_dim(const mxl_game* game, int player, int* dim) {
  MXL_REQUIRE(game && dim, "mxl_game_player_dim: null argument");
  MXL_REQUIRE(player >= 0 && player < game->model->num_players(), "mxl_game_player_dim: player out of range");
  *dim = game->model->domain(player).dim();
  return MXL_OK;
}

void mxl_game_free(mxl_game* game) { delete game; }

mxl_status mxl_solver_params_default(mxl_solver_params* p) {
  MXL_REQUIRE(p, "mxl_solver_params_default: null argument");
  *p = mxl_solver_params{};
  p->schedule = MXL_SCHEDULE_POWER_LAW;
  p->gamma0 = 1.0;
  p->exponent = 0.5;
  p->strength = 1.0;
  p->noise = MXL_NOISE_NONE;
  p->tail_index = 1.5;
  p->scale = 1.0;
  p->max_iters = 10000;
  p->stop_residual = 1e-6;
  p->log_every = 1;
  p->seed = 0;
  return MXL_OK;
}

mxl_status mxl_solve(const mxl_game* game, const mxl_solver_params* p, mxl_result** out) {
  MXL_REQUIRE(game && p && out, "mxl_solve: null argument");
  *out = nullptr;
  return guarded([&] {
    mxl::SolverConfig c;
    switch (p->schedule) {
      case MXL_SCHEDULE_POWER_LAW: c.schedule = mxl::StepSchedule::power_law(p->gamma0, p->exponent); break;
      case MXL_SCHEDULE_OPTIMIZED: c.schedule = mxl::StepSchedule::optimized(p->strength); break;
      case MXL_SCHEDULE_CONSTANT: c.schedule = mxl::StepSchedule::constant(p->gamma0); break;
      default: throw mxl::ConfigError("mxl_solve: unknown schedule kind");
    }
    switch (p->noise) {
      case MXL_NOISE_NONE: c.noise = mxl::NoiseModel::none(); break;
      case MXL_NOISE_GAUSSIAN: c.noise = mxl::NoiseModel::gaussian(p->sigma); break;
      case MXL_NOISE_RELATIVE: c.noise = mxl::NoiseModel::relative(p->level); break;
      case MXL_NOISE_PARETO: c.noise = mxl::NoiseModel::pareto_tail(p->tail_index, p->scale); break;
      default: throw mxl::ConfigError("mxl_solve: unknown noise kind");
    }
    c.max_iters = p->max_iters;
    c.stop_residual = p->stop_residual;
    c.log_every = p->log_every;
    c.seed = p->seed;
    auto r = std::make_unique<mxl_result>();
    r->trace = mxl::run(*game->model, c);
    *out = r.release();
    return MXL_OK;
  });
}

mxl_status mxl_result_summary(const mxl_result* result, mxl_run_status* status, long* iterations,
                              double* nash_residual) {
  MXL_REQUIRE(result, "mxl_result_summary: null result");
  if (status) {
    switch (result->trace.status) {
      case mxl::RunStatus::kConverged: *status = MXL_RUN_CONVERGED; break;
      case mxl::RunStatus::kMaxIters: *status = MXL_RUN_MAX_ITERS; break;
      case mxl::RunStatus::kDiverged: *status = MXL_RUN_DIVERGED; break;
    }
  }
  if (iterations) *iterations = result->trace.iterations;
  if (nash_residual) *nash_residual = result->trace.last().nash_residual;
  return MXL_OK;
}

mxl_status mxl_result_action(const mxl_result* result, int player, double* buffer, size_t capacity,
                             size_t* written) {
  MXL_REQUIRE(result, "mxl_result_action: null result");
  const auto& actions = result->trace.final_actions;
  MXL_REQUIRE(player >= 0 && player < static_cast<int>(actions.size()), "mxl_result_action: player out of range");
  const auto& x = actions[player];
  const size_t need = 2 * static_cast<size_t>(x.dim()) * x.dim();
  if (written) *written = need;
  MXL_REQUIRE(buffer && capacity >= need, "mxl_result_action: buffer too small");
  size_t k = 0;
  for (int r = 0; r < x.dim(); ++r)
    for (int c = 0; c < x.dim(); ++c) {
      buffer[k++] = x(r, c).real();
      buffer[k++] = x(r, c).imag();
    }
  return MXL_OK;
}

mxl_status mxl_result_trace_csv(const mxl_result* result, const char** csv) {
  MXL_REQUIRE(result && csv, "mxl_result_trace_csv: null argument");
  return guarded([&] {
    if (result->csv.empty()) result->csv = mxl::trace_csv(result->trace);
    *csv = result->csv.c_str();
    return MXL_OK;
  });
}

void mxl_result_free(mxl_result* result) { delete result; }

}  // extern "C"
