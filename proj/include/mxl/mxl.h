#ifndef MXL_MXL_H
#define MXL_MXL_H

/* C interface to the matrix exponential learning library.
 *
 * Every function returns an mxl_status. On failure, mxl_last_error() holds a
 * message for the calling thread until its next failing call. Handles are
 * opaque and owned by the caller; free them with the matching *_free. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MXL_API __declspec(dllexport)
#else
#define MXL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mxl_status {
  MXL_OK = 0,
  MXL_ERR_ARGUMENT = 1, /* null pointer, bad index or too small buffer */
  MXL_ERR_CONFIG = 2,   /* invalid scenario or parameters */
  MXL_ERR_DOMAIN = 3,   /* input outside its mathematical domain */
  MXL_ERR_NUMERIC = 4,  /* non-finite values or a failed oracle */
  MXL_ERR_IO = 5,
  MXL_ERR_INTERNAL = 6
} mxl_status;

typedef enum mxl_command { MXL_CMD_RUN = 0, MXL_CMD_VERIFY = 1, MXL_CMD_SWEEP = 2 } mxl_command;

typedef enum mxl_run_status {
  MXL_RUN_CONVERGED = 0,
  MXL_RUN_MAX_ITERS = 1,
  MXL_RUN_DIVERGED = 2
} mxl_run_status;

typedef enum mxl_schedule_kind {
  MXL_SCHEDULE_POWER_LAW = 0, /* gamma0 / n^exponent */
  MXL_SCHEDULE_OPTIMIZED = 1, /* 2 / (strength n) */
  MXL_SCHEDULE_CONSTANT = 2
} mxl_schedule_kind;

typedef enum mxl_noise_kind {
  MXL_NOISE_NONE = 0,
  MXL_NOISE_GAUSSIAN = 1, /* sigma */
  MXL_NOISE_RELATIVE = 2, /* level, relative to the current gradient */
  MXL_NOISE_PARETO = 3    /* tail_index, scale */
} mxl_noise_kind;

typedef struct mxl_solver_params {
  mxl_schedule_kind schedule;
  double gamma0;
  double exponent;
  double strength;
  mxl_noise_kind noise;
  double sigma;
  double level;
  double tail_index;
  double scale;
  long max_iters;
  double stop_residual;
  long log_every;
  uint64_t seed;
} mxl_solver_params;

typedef struct mxl_scenario mxl_scenario;
typedef struct mxl_game mxl_game;
typedef struct mxl_result mxl_result;

MXL_API const char* mxl_version(void);
MXL_API const char* mxl_last_error(void);
MXL_API const char* mxl_status_name(mxl_status status);

/* Scenarios: the same YAML files the command-line tool reads. */
MXL_API mxl_status mxl_scenario_load(const char* path, mxl_scenario** out);
MXL_API mxl_status mxl_scenario_load_string(const char* text, const char* origin, mxl_scenario** out);
MXL_API mxl_status mxl_scenario_set_seed(mxl_scenario* scenario, uint64_t seed);
/* Writes outputs under out_dir. exit_code follows the command-line contract:
 * 0 ok, 1 error, 2 not converged, 3 verification failed. A nonzero exit code is
 * not a call failure; the message is still available from mxl_last_error(). */
MXL_API mxl_status mxl_scenario_execute(const mxl_scenario* scenario, mxl_command command,
                                        const char* out_dir, int quiet, int* exit_code);
/* Fully resolved configuration as JSON; the string lives until the next call on this handle. */
MXL_API mxl_status mxl_scenario_config_json(mxl_scenario* scenario, const char** json);
MXL_API void mxl_scenario_free(mxl_scenario* scenario);

/* Games. */
MXL_API mxl_status mxl_game_mac_quadratic(int players, double b, double c, mxl_game** out);
MXL_API mxl_status mxl_game_linear(int dim, const double* eigenvalues, double trace_bound, mxl_game** out);
MXL_API mxl_status mxl_game_ee(int users, int tx_antennas, int rx_antennas, int subcarriers,
                               double pathloss_spread_db, double cross_attenuation_db, double p_max,
                               double p_circuit, uint64_t seed, mxl_game** out);
MXL_API mxl_status mxl_game_num_players(const mxl_game* game, int* players);
MXL_API mxl_status mxl_game_player_dim(const mxl_game* game, int player, int* dim);
MXL_API void mxl_game_free(mxl_game* game);

/* Solver. */
MXL_API mxl_status mxl_solver_params_default(mxl_solver_params* params);
MXL_API mxl_status mxl_solve(const mxl_game* game, const mxl_solver_params* params, mxl_result** out);
MXL_API mxl_status mxl_result_summary(const mxl_result* result, mxl_run_status* status, long* iterations,
                                      double* nash_residual);
/* Copies player `player`'s final action as dim*dim interleaved (re, im) pairs, row-major.
 * capacity counts doubles; *written receives 2*dim*dim. */
MXL_API mxl_status mxl_result_action(const mxl_result* result, int player, double* buffer, size_t capacity,
                                     size_t* written);
MXL_API mxl_status mxl_result_trace_csv(const mxl_result* result, const char** csv);
MXL_API void mxl_result_free(mxl_result* result);

#ifdef __cplusplus
}
#endif

#endif /* MXL_MXL_H */
