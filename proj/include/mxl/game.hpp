#pragma once

// N-player concave games on spectrahedra: the game interface, the Nash
// residual and sampled stability diagnostics (monotonicity, variational
// stability, game Hessian).

#include "mxl/random.hpp"
#include "mxl/spectral.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace mxl {

struct PlayerSpec {
  int id;  // 1..N
  Spectrahedron domain;
};

/// One action per player; equivalently the block-diagonal matrix diag(X_1, ..., X_N).
using ActionProfile = std::vector<HermitianMatrix>;

/// A game whose players maximize utility(i, .) over their spectrahedra.
/// Implementations must be reentrant: no mutable state across calls.
class GameModel {
 public:
  virtual ~GameModel() = default;

  virtual std::string name() const = 0;
  virtual const std::vector<PlayerSpec>& players() const = 0;
  int num_players() const { return static_cast<int>(players().size()); }
  const Spectrahedron& domain(int i) const { return players().at(i).domain; }

  /// Player indices are 0-based here; PlayerSpec::id is 1-based.
  virtual double utility(int i, const ActionProfile& x) const = 0;
  /// V_i(X): gradient of utility(i, .) in the player's own action, so that
  /// d/dt utility(i, X_i + t Z) = Re tr(Z V_i).
  virtual HermitianMatrix payoff_gradient(int i, const ActionProfile& x) const = 0;

  /// Games whose objective is an expectation provide an unbiased sample here.
  virtual bool has_stochastic_gradient() const { return false; }
  virtual HermitianMatrix stochastic_gradient(int i, const ActionProfile& x, Rng& rng) const;
};

/// Checks ids are 1..N in order.
void validate_players(const std::vector<PlayerSpec>& players);

bool is_feasible(const GameModel& game, const ActionProfile& x);
/// Throws DomainError naming the first infeasible player.
void require_feasible(const GameModel& game, const ActionProfile& x);

/// Sum over players of the nuclear norm of X_i - Y_i.
double profile_distance(const ActionProfile& a, const ActionProfile& b);
/// a + t (b - a), player by player.
ActionProfile profile_lerp(const ActionProfile& a, const ActionProfile& b, double t);
/// mirror_map(0) for every player: trace_bound * I / (1 + M).
ActionProfile uniform_interior_profile(const GameModel& game);
ActionProfile random_profile(const GameModel& game, Rng& rng);

/// Largest block eigenvalue; the linear maximizer over a (block) spectrahedron.
double max_block_eigenvalue(const HermitianMatrix& v, const Spectrahedron& domain);

/// max_i [A_i max(lambda_max(V_i), 0) - tr(X_i V_i)]. Zero exactly at first-order Nash points.
double nash_residual(const GameModel& game, const ActionProfile& x);

struct StabilityReport {
  static constexpr double kViolationTol = 1e-9;
  static constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

  int samples = 0;
  std::uint64_t rng_seed = 0;

  bool has_monotonicity = false;
  int monotonicity_violations = 0;
  double monotonicity_worst = kUnset;

  bool has_variational_stability = false;
  double vs_radius = kUnset;
  int vs_violations = 0;
  double vs_worst = kUnset;

  bool has_hessian = false;
  int hessian_samples = 0;
  double hessian_max_quadform = kUnset;

  /// No violation among the checks that ran (and a negative Hessian sample maximum).
  bool passed() const;
};

/// Samples feasible pairs and records tr[(X' - X)(V(X') - V(X))].
StabilityReport check_monotonicity(const GameModel& game, int samples, std::uint64_t seed);

/// Samples X within nuclear distance `radius` of xstar and records tr[(X - X*) V(X)].
StabilityReport check_variational_stability(const GameModel& game, const ActionProfile& xstar,
                                            double radius, int samples, std::uint64_t seed);

/// Symmetrized directional derivative sum_i tr(Z_i (V_i(X + eps Z) - V_i(X - eps Z))) / (2 eps).
/// Shrinks eps tenfold up to three times when X +- eps Z leaves the feasible set.
double hessian_quadratic_form(const GameModel& game, const ActionProfile& x,
                              const ActionProfile& z, double eps = 1e-5);

/// Samples interior points and unit directions; records the largest quadratic form.
StabilityReport check_hessian(const GameModel& game, int samples, std::uint64_t seed);

/// Worst relative error between tr(Z V_i(X)) and the central difference of
/// utility(i, .) along each direction.
double finite_diff_gradient_check(const GameModel& game, int i, const ActionProfile& x,
                                  std::span<const HermitianMatrix> directions, double eps);

/// Same, with `count` random unit directions drawn from `seed`.
double finite_diff_gradient_check(const GameModel& game, int i, const ActionProfile& x,
                                  int count, double eps, std::uint64_t seed);

}  // namespace mxl
