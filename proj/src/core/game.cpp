#include "mxl/game.hpp"

#include "mxl/errors.hpp"
#include "mxl/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mxl {

HermitianMatrix GameModel::stochastic_gradient(int i, const ActionProfile& x, Rng&) const {
  return payoff_gradient(i, x);
}

void validate_players(const std::vector<PlayerSpec>& players) {
  if (players.empty()) throw ConfigError("game needs at least one player");
  for (std::size_t k = 0; k < players.size(); ++k) {
    if (players[k].id != static_cast<int>(k) + 1) {
      throw ConfigError("player ids must be contiguous 1..N, got " +
                        std::to_string(players[k].id) + " at position " + std::to_string(k + 1));
    }
  }
}

bool is_feasible(const GameModel& game, const ActionProfile& x) {
  if (static_cast<int>(x.size()) != game.num_players()) return false;
  for (int i = 0; i < game.num_players(); ++i) {
    if (!game.domain(i).contains(x[i])) return false;
  }
  return true;
}

void require_feasible(const GameModel& game, const ActionProfile& x) {
  if (static_cast<int>(x.size()) != game.num_players()) {
    throw ShapeError("action profile has " + std::to_string(x.size()) + " entries for " +
                     std::to_string(game.num_players()) + " players");
  }
  for (int i = 0; i < game.num_players(); ++i) {
    if (!game.domain(i).contains(x[i])) {
      throw DomainError("action of player " + std::to_string(i + 1) + " is infeasible");
    }
  }
}

double profile_distance(const ActionProfile& a, const ActionProfile& b) {
  if (a.size() != b.size()) throw ShapeError("profile_distance: size mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += nuclear_norm(a[i] - b[i]);
  return d;
}

ActionProfile profile_lerp(const ActionProfile& a, const ActionProfile& b, double t) {
  if (a.size() != b.size()) throw ShapeError("profile_lerp: size mismatch");
  ActionProfile out;
  out.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(a[i] + (b[i] - a[i]) * t);
  return out;
}

ActionProfile uniform_interior_profile(const GameModel& game) {
  ActionProfile x;
  for (const auto& p : game.players()) {
    x.push_back(mirror_map(HermitianMatrix::zero(p.domain.dim()), p.domain));
  }
  return x;
}

ActionProfile random_profile(const GameModel& game, Rng& rng) {
  ActionProfile x;
  for (const auto& p : game.players()) x.push_back(random_spectrahedron_point(p.domain, rng));
  return x;
}

double max_block_eigenvalue(const HermitianMatrix& v, const Spectrahedron& domain) {
  if (!domain.has_blocks()) return v.max_eigenvalue();
  double top = -std::numeric_limits<double>::infinity();
  int off = 0;
  for (int b : domain.blocks()) {
    const auto blk = HermitianMatrix::from_trusted(v.matrix().block(off, off, b, b));
    top = std::max(top, blk.max_eigenvalue());
    off += b;
  }
  return top;
}

double nash_residual(const GameModel& game, const ActionProfile& x) {
  require_feasible(game, x);
  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < game.num_players(); ++i) {
    const auto& dom = game.domain(i);
    const HermitianMatrix v = game.payoff_gradient(i, x);
    if (!v.all_finite()) throw NumericError("non-finite gradient for player " + std::to_string(i + 1));
    const double best = dom.trace_bound() * std::max(max_block_eigenvalue(v, dom), 0.0);
    worst = std::max(worst, best - trace_inner(x[i], v));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Stability diagnostics

bool StabilityReport::passed() const {
  bool ok = true;
  if (has_monotonicity) ok = ok && monotonicity_violations == 0;
  if (has_variational_stability) ok = ok && vs_violations == 0;
  if (has_hessian) ok = ok && hessian_max_quadform <= kViolationTol;
  return ok;
}

namespace {

double profile_inner(const ActionProfile& a, const ActionProfile& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += trace_inner(a[i], b[i]);
  return s;
}

ActionProfile gradient_profile(const GameModel& game, const ActionProfile& x) {
  ActionProfile v;
  for (int i = 0; i < game.num_players(); ++i) v.push_back(game.payoff_gradient(i, x));
  return v;
}

ActionProfile difference(const ActionProfile& a, const ActionProfile& b) {
  ActionProfile d;
  for (std::size_t i = 0; i < a.size(); ++i) d.push_back(a[i] - b[i]);
  return d;
}

struct Tally {
  int violations = 0;
  double worst = -std::numeric_limits<double>::infinity();
};

Tally tally(const std::vector<double>& values) {
  Tally t;
  for (double v : values) {
    if (v > StabilityReport::kViolationTol) ++t.violations;
    t.worst = std::max(t.worst, v);
  }
  return t;
}

}  // namespace

StabilityReport check_monotonicity(const GameModel& game, int samples, std::uint64_t seed) {
  if (samples < 1) throw ConfigError("check_monotonicity: samples must be >= 1");
  std::vector<double> values(samples);
  parallel_for(static_cast<std::size_t>(samples), [&](std::size_t k) {
    Rng rng = make_rng(seed, k);
    const ActionProfile x = random_profile(game, rng);
    const ActionProfile xp = random_profile(game, rng);
    values[k] = profile_inner(difference(xp, x),
                              difference(gradient_profile(game, xp), gradient_profile(game, x)));
  });
  const Tally t = tally(values);
  StabilityReport r;
  r.samples = samples;
  r.rng_seed = seed;
  r.has_monotonicity = true;
  r.monotonicity_violations = t.violations;
  r.monotonicity_worst = t.worst;
  return r;
}

StabilityReport check_variational_stability(const GameModel& game, const ActionProfile& xstar,
                                            double radius, int samples, std::uint64_t seed) {
  if (samples < 1) throw ConfigError("check_variational_stability: samples must be >= 1");
  if (!(radius >= 0.0)) throw ConfigError("check_variational_stability: radius must be >= 0");
  require_feasible(game, xstar);
  std::vector<double> values(samples);
  parallel_for(static_cast<std::size_t>(samples), [&](std::size_t k) {
    Rng rng = make_rng(seed, k);
    const ActionProfile w = random_profile(game, rng);
    const double dist = profile_distance(w, xstar);
    const double u = uniform01(rng);
    const double t = dist > 0.0 ? std::min(1.0, u * radius / dist) : 0.0;
    // Convex combination with a feasible point stays feasible.
    const ActionProfile x = profile_lerp(xstar, w, t);
    values[k] = profile_inner(difference(x, xstar), gradient_profile(game, x));
  });
  const Tally t = tally(values);
  StabilityReport r;
  r.samples = samples;
  r.rng_seed = seed;
  r.has_variational_stability = true;
  r.vs_radius = radius;
  r.vs_violations = t.violations;
  r.vs_worst = t.worst;
  return r;
}

double hessian_quadratic_form(const GameModel& game, const ActionProfile& x,
                              const ActionProfile& z, double eps) {
  if (z.size() != x.size()) throw ShapeError("hessian_quadratic_form: direction size mismatch");
  require_feasible(game, x);
  double e = eps;
  for (int attempt = 0; attempt <= 3; ++attempt, e /= 10.0) {
    ActionProfile plus, minus;
    for (std::size_t i = 0; i < x.size(); ++i) {
      plus.push_back(x[i] + z[i] * e);
      minus.push_back(x[i] - z[i] * e);
    }
    if (!is_feasible(game, plus) || !is_feasible(game, minus)) continue;
    return profile_inner(z, difference(gradient_profile(game, plus), gradient_profile(game, minus))) /
           (2.0 * e);
  }
  throw DomainError("hessian_quadratic_form: perturbation leaves the feasible set");
}

StabilityReport check_hessian(const GameModel& game, int samples, std::uint64_t seed) {
  if (samples < 1) throw ConfigError("check_hessian: samples must be >= 1");
  const ActionProfile center = uniform_interior_profile(game);
  std::vector<double> values(samples);
  parallel_for(static_cast<std::size_t>(samples), [&](std::size_t k) {
    Rng rng = make_rng(seed, k);
    const ActionProfile x = profile_lerp(center, random_profile(game, rng), 0.9);
    ActionProfile z;
    double norm2 = 0.0;
    for (int i = 0; i < game.num_players(); ++i) {
      z.push_back(random_direction(game.domain(i), rng));
      norm2 += z.back().matrix().squaredNorm();
    }
    for (auto& zi : z) zi *= 1.0 / std::sqrt(norm2);
    values[k] = hessian_quadratic_form(game, x, z, 1e-5);
  });
  StabilityReport r;
  r.samples = samples;
  r.rng_seed = seed;
  r.has_hessian = true;
  r.hessian_samples = samples;
  r.hessian_max_quadform = *std::max_element(values.begin(), values.end());
  return r;
}

double finite_diff_gradient_check(const GameModel& game, int i, const ActionProfile& x,
                                  std::span<const HermitianMatrix> directions, double eps) {
  require_feasible(game, x);
  const HermitianMatrix v = game.payoff_gradient(i, x);
  double worst = 0.0;
  for (const auto& z : directions) {
    ActionProfile plus = x, minus = x;
    plus[i] += z * eps;
    minus[i] -= z * eps;
    const double fd = (game.utility(i, plus) - game.utility(i, minus)) / (2.0 * eps);
    const double an = trace_inner(z, v);
    const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
    worst = std::max(worst, std::abs(fd - an) / denom);
  }
  return worst;
}

double finite_diff_gradient_check(const GameModel& game, int i, const ActionProfile& x,
                                  int count, double eps, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0);
  std::vector<HermitianMatrix> dirs;
  for (int k = 0; k < count; ++k) dirs.push_back(random_direction(game.domain(i), rng));
  return finite_diff_gradient_check(game, i, x, dirs, eps);
}

}  // namespace mxl
