#pragma once

// Independent equilibrium oracles and the statistical estimators used to
// check convergence claims at desk scale.

#include "mxl/solver.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace mxl {

struct BruteForceOptions {
  double tolerance = 1e-7;  // target Nash residual
  int max_rounds = 5000;
  int grid_points = 201;    // scalar best responses: grid search, then golden section
  int inner_iters = 20000;  // matrix best responses: projected-gradient iterations per round
};

struct BruteForceResult {
  ActionProfile profile;
  double residual = std::numeric_limits<double>::infinity();
  int rounds = 0;
  bool converged = false;
  std::string message;
};

/// Gauss-Seidel best-response iteration from `start` (uniform interior by default).
/// Scalar players maximize their utility by grid plus golden-section search; matrix
/// players by projected gradient ascent with Armijo backtracking. A run that does not
/// settle within max_rounds is reported as not converged.
BruteForceResult brute_force_ne(const GameModel& game, const BruteForceOptions& options = {},
                                std::optional<ActionProfile> start = std::nullopt);

/// Sum over players of bregman_divergence(X*_i, X_i).
double profile_divergence(const GameModel& game, const ActionProfile& xstar, const ActionProfile& x);

struct StrongStabilityEstimate {
  double b_hat = 0.0;
  int samples = 0;
  int used = 0;  // samples with divergence above 1e-9
  int violation_count = 0;
  double min_ratio = std::numeric_limits<double>::infinity();
  double radius = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
};

/// min over sampled X of -tr((X - X*) V(X)) / D(X*, X), clipped at zero. With a finite
/// radius, X is drawn within that nuclear distance of X*, as in the stability check.
StrongStabilityEstimate estimate_strong_stability(
    const GameModel& game, const ActionProfile& xstar, int samples, std::uint64_t seed,
    double radius = std::numeric_limits<double>::infinity());

enum class RateMetric { kKl, kNuclearDistance };
const char* to_string(RateMetric m);

struct RateConfig {
  StepSchedule schedule;
  NoiseModel noise;
  int seeds = 100;
  std::vector<long> checkpoints;
  RateMetric metric = RateMetric::kNuclearDistance;
  std::uint64_t seed = 0;
  std::optional<double> b_hat;  // enables the explicit bound check
  std::optional<std::vector<HermitianMatrix>> initial_scores;
  bool stochastic_oracle = true;
};

struct RateFit {
  std::vector<long> checkpoints;
  std::vector<double> values;  // mean of the fitted metric
  std::vector<double> stderrs;
  std::vector<double> distance_mean, distance_stderr;
  std::vector<double> kl_mean, kl_stderr;
  double slope = 0.0;
  double slope_stderr = 0.0;
  double intercept = 0.0;
  int seeds = 0;
  double v_hat = 0.0;  // largest sampled dual norm of a gradient estimate
  bool monotone = false;  // fitted metric strictly decreasing over checkpoints

  std::optional<double> b_hat;
  std::optional<double> gamma_b;  // gamma * b_hat for gamma / n schedules
  bool gamma_b_flag = false;      // gamma * b_hat <= 1: the rate bound does not apply
  std::vector<double> kl_bound;   // gamma^2 V^2 / ((B gamma - 1) n)
  std::optional<bool> bound_ok;
};

/// Runs config.seeds independent trajectories to the last checkpoint and fits the
/// log-log slope of the mean metric. Requires >= 4 increasing checkpoints spanning
/// >= 2 decades.
RateFit rate_experiment(const GameModel& game, const ActionProfile& xstar, const RateConfig& config);

/// Ordinary least squares of log(values) on log(checkpoints): {slope, stderr, intercept}.
struct LogLogFit {
  double slope;
  double slope_stderr;
  double intercept;
};
LogLogFit fit_log_log(const std::vector<long>& n, const std::vector<double>& values);

/// True if every action is zero or rank one with full trace (an extreme point).
bool is_extreme_profile(const GameModel& game, const ActionProfile& x, double tol = 1e-6);
/// True if every action is positive definite with trace strictly below its bound.
bool is_interior_profile(const GameModel& game, const ActionProfile& x, double tol = 1e-6);

}  // namespace mxl
