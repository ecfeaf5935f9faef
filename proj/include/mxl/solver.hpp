#pragma once

// Matrix exponential learning: Y_i <- Y_i + step_n * hermitize(V_i + Z_i),
// X_i = mirror_map(Y_i), in synchronous and asynchronous form.

#include "mxl/game.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mxl {

struct StepSchedule {
  enum class Kind { kPowerLaw, kOptimized, kConstant };
  Kind kind = Kind::kPowerLaw;
  double gamma0 = 1.0;
  double exponent = 0.5;
  double strength = 1.0;  // B in 2 / (B n)

  static StepSchedule power_law(double gamma0, double exponent) {
    return {Kind::kPowerLaw, gamma0, exponent, 1.0};
  }
  static StepSchedule optimized(double strength) { return {Kind::kOptimized, 1.0, 1.0, strength}; }
  static StepSchedule constant(double gamma0) { return {Kind::kConstant, gamma0, 0.0, 1.0}; }

  void validate() const;
  /// Step size at iteration n >= 1.
  double at(long n) const;
  /// gamma in gamma / n when the schedule has that form, else nullopt.
  std::optional<double> harmonic_coefficient() const;
};

struct NoiseModel {
  enum class Kind { kNone, kGaussian, kRelative, kParetoTail };
  Kind kind = Kind::kNone;
  double sigma = 0.0;       // gaussian: E ||Z||_F^2 = sigma^2 dim
  double level = 0.0;       // relative: E ||Z||_F^2 = level^2 ||V||_F^2
  double tail_index = 1.5;  // pareto: Z = scale P G with P ~ Pareto(tail_index)
  double scale = 1.0;
  /// Off: emit raw complex (non-Hermitian) noise and rely on the solver's hermitize step.
  bool hermitian = true;

  static NoiseModel none() { return {}; }
  static NoiseModel gaussian(double sigma) { return {Kind::kGaussian, sigma}; }
  static NoiseModel relative(double level) { return {Kind::kRelative, 0.0, level}; }
  static NoiseModel pareto_tail(double index, double scale) {
    return {Kind::kParetoTail, 0.0, 0.0, index, scale};
  }

  void validate() const;
};

/// V + Z. The result is Hermitian unless model.hermitian is off.
CMatrix inject_noise(const HermitianMatrix& v, const NoiseModel& model, Rng& rng);

/// Gaussian model with sigma = level * ||V(X)||_F, the stacked gradient magnitude at `at`.
NoiseModel gaussian_at_level(const GameModel& game, const ActionProfile& at, double level);

/// Keeps only the diagonal blocks of the domain.
HermitianMatrix restrict_to_blocks(const HermitianMatrix& h, const Spectrahedron& domain);

/// Scores Y with mirror_map(Y) = x for an interior x.
HermitianMatrix scores_for_action(const HermitianMatrix& x, const Spectrahedron& domain);

struct SolverState {
  std::vector<HermitianMatrix> scores;
  ActionProfile actions;
  long n = 0;  // steps taken so far

  static SolverState start(const GameModel& game);
  static SolverState start_from_scores(const GameModel& game, std::vector<HermitianMatrix> scores);
};

struct StepInfo {
  double step_size = 0.0;
  std::vector<double> noise_norm;  // dual norm of the hermitized noise per player
  std::vector<double> estimate_norm;  // dual norm of the gradient estimate per player
};

/// One synchronous step. Uses the game's stochastic oracle when `stochastic` is set and
/// available. Throws NumericError on a non-finite gradient or score.
StepInfo mxl_step(const GameModel& game, SolverState& state, const StepSchedule& schedule,
                  const NoiseModel& noise, Rng& rng, bool stochastic = true);

struct SolverConfig {
  StepSchedule schedule;
  NoiseModel noise;
  long max_iters = 1000;
  double stop_residual = 0.0;
  std::uint64_t seed = 0;
  long log_every = 1;
  bool stochastic_oracle = true;
  bool keep_actions = false;
  std::optional<ActionProfile> reference_point;
  std::optional<std::vector<HermitianMatrix>> initial_scores;

  void validate(const GameModel& game) const;
};

enum class RunStatus { kConverged, kMaxIters, kDiverged };
const char* to_string(RunStatus s);

struct TraceRecord {
  long n = 0;
  double step_size = 0.0;
  std::vector<double> utility;
  double nash_residual = 0.0;
  std::optional<double> kl_to_ref;  // Fenchel coupling of the scores, summed over players
  std::vector<double> noise_norm;
  std::optional<ActionProfile> actions;
};

struct RunTrace {
  std::vector<TraceRecord> records;
  RunStatus status = RunStatus::kMaxIters;
  long iterations = 0;
  std::uint64_t seed = 0;
  ActionProfile final_actions;
  std::vector<HermitianMatrix> final_scores;
  std::vector<long> update_counts;
  std::string message;

  const TraceRecord& last() const { return records.back(); }
};

struct AsyncSchedule {
  enum class Mode { kBernoulli, kOneAtATime };
  std::vector<double> update_prob;  // one entry per player, or a single shared entry
  int max_delay = 0;
  Mode mode = Mode::kBernoulli;

  void validate(int num_players) const;
  double prob(int i) const { return update_prob.size() == 1 ? update_prob[0] : update_prob[i]; }
};

/// Iterates mxl_step from Y(0) (zero unless config.initial_scores is set). Logs X(0), every
/// log_every-th iterate and the last one; stops once the noiseless residual at a logged
/// iterate is <= stop_residual. Noise draws use stream 0 of config.seed.
RunTrace run(const GameModel& game, const SolverConfig& config);

/// Asynchronous variant: at each epoch a random subset of players steps with its own
/// update count, using gradients at a profile whose player-j component is d_j epochs old,
/// d_j uniform on {0..max_delay}. Noise uses stream 0 and the schedule stream 1, so
/// p_i = 1, max_delay = 0 reproduces run() exactly.
RunTrace run_async(const GameModel& game, const SolverConfig& config,
                   const AsyncSchedule& schedule);

/// Tidy CSV: n,player,utility,nash_residual,kl_to_ref,step_size with 17 significant digits.
std::string trace_csv(const RunTrace& trace);

/// Fixed-precision formatting used by every CSV writer.
std::string format_double(double v);

}  // namespace mxl
