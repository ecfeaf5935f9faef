#include "mxl/solver.hpp"

#include "mxl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <sstream>

namespace mxl {

// ---------------------------------------------------------------------------
// Schedules and noise

void StepSchedule::validate() const {
  switch (kind) {
    case Kind::kPowerLaw:
      if (!(gamma0 > 0.0) || !std::isfinite(gamma0)) throw ConfigError("power_law: gamma0 must be > 0");
      if (!(exponent > 0.0 && exponent <= 1.0)) {
        throw ConfigError("power_law: exponent must lie in (0, 1]");
      }
      break;
    case Kind::kOptimized:
      if (!(strength > 0.0) || !std::isfinite(strength)) {
        throw ConfigError("optimized: strength must be > 0");
      }
      break;
    case Kind::kConstant:
      if (!(gamma0 > 0.0) || !std::isfinite(gamma0)) throw ConfigError("constant: gamma0 must be > 0");
      break;
  }
}

double StepSchedule::at(long n) const {
  const double dn = static_cast<double>(std::max(n, 1L));
  switch (kind) {
    case Kind::kPowerLaw:
      return exponent == 1.0 ? gamma0 / dn : gamma0 / std::pow(dn, exponent);
    case Kind::kOptimized:
      return 2.0 / (strength * dn);
    case Kind::kConstant:
      return gamma0;
  }
  return gamma0;
}

std::optional<double> StepSchedule::harmonic_coefficient() const {
  if (kind == Kind::kOptimized) return 2.0 / strength;
  if (kind == Kind::kPowerLaw && exponent == 1.0) return gamma0;
  return std::nullopt;
}

void NoiseModel::validate() const {
  switch (kind) {
    case Kind::kNone:
      break;
    case Kind::kGaussian:
      if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("gaussian noise: sigma must be >= 0");
      break;
    case Kind::kRelative:
      if (!(level >= 0.0) || !std::isfinite(level)) throw ConfigError("relative noise: level must be >= 0");
      break;
    case Kind::kParetoTail:
      if (!(tail_index > 1.0)) throw ConfigError("pareto noise: tail index must be > 1");
      if (!(scale >= 0.0) || !std::isfinite(scale)) throw ConfigError("pareto noise: scale must be >= 0");
      break;
  }
}

namespace {

CMatrix noise_matrix(int dim, double variance, bool hermitian, Rng& rng) {
  if (hermitian) return gaussian_hermitian(dim, variance, rng).matrix();
  return gaussian_complex(dim, variance, rng);
}

}  // namespace

CMatrix inject_noise(const HermitianMatrix& v, const NoiseModel& model, Rng& rng) {
  const int d = v.dim();
  switch (model.kind) {
    case NoiseModel::Kind::kNone:
      return v.matrix();
    case NoiseModel::Kind::kGaussian:
      if (model.sigma == 0.0) return v.matrix();
      return v.matrix() + noise_matrix(d, model.sigma * model.sigma / d, model.hermitian, rng);
    case NoiseModel::Kind::kRelative: {
      const double mag = model.level * v.matrix().norm() / d;
      if (mag == 0.0) return v.matrix();
      return v.matrix() + noise_matrix(d, mag * mag, model.hermitian, rng);
    }
    case NoiseModel::Kind::kParetoTail: {
      if (model.scale == 0.0) return v.matrix();
      const double u = 1.0 - uniform01(rng);  // (0, 1]
      const double p = std::pow(u, -1.0 / model.tail_index);
      return v.matrix() + model.scale * p * noise_matrix(d, 1.0 / d, model.hermitian, rng);
    }
  }
  return v.matrix();
}

NoiseModel gaussian_at_level(const GameModel& game, const ActionProfile& at, double level) {
  if (!(level >= 0.0)) throw ConfigError("noise level must be >= 0");
  double sq = 0.0;
  for (int i = 0; i < game.num_players(); ++i) sq += game.payoff_gradient(i, at).matrix().squaredNorm();
  return NoiseModel::gaussian(level * std::sqrt(sq));
}

HermitianMatrix restrict_to_blocks(const HermitianMatrix& h, const Spectrahedron& domain) {
  if (!domain.has_blocks()) return h;
  CMatrix out = CMatrix::Zero(h.dim(), h.dim());
  int off = 0;
  for (int b : domain.blocks()) {
    out.block(off, off, b, b) = h.matrix().block(off, off, b, b);
    off += b;
  }
  return HermitianMatrix::from_trusted(std::move(out));
}

HermitianMatrix scores_for_action(const HermitianMatrix& x, const Spectrahedron& domain) {
  if (x.dim() != domain.dim()) throw ShapeError("scores_for_action: dimension mismatch");
  const double a = domain.trace_bound();
  const double slack = 1.0 - x.trace() / a;
  if (!(slack > 0.0)) throw DomainError("scores_for_action: point is not interior");
  CMatrix out = CMatrix::Zero(x.dim(), x.dim());
  int off = 0;
  for (int b : domain.block_sizes()) {
    const auto blk = HermitianMatrix::from_trusted(x.matrix().block(off, off, b, b)) * (1.0 / a);
    if (blk.eigenvalues().minCoeff() <= 0.0) throw DomainError("scores_for_action: point is not interior");
    out.block(off, off, b, b) = herm_logm(blk).matrix();
    off += b;
  }
  out -= std::log(slack) * CMatrix::Identity(x.dim(), x.dim());
  return hermitize(out);
}

// ---------------------------------------------------------------------------
// Steps

SolverState SolverState::start(const GameModel& game) {
  std::vector<HermitianMatrix> y;
  for (int i = 0; i < game.num_players(); ++i) y.push_back(HermitianMatrix::zero(game.domain(i).dim()));
  return start_from_scores(game, std::move(y));
}

SolverState SolverState::start_from_scores(const GameModel& game, std::vector<HermitianMatrix> scores) {
  if (static_cast<int>(scores.size()) != game.num_players()) {
    throw ShapeError("initial scores: one matrix per player required");
  }
  SolverState s;
  for (int i = 0; i < game.num_players(); ++i) {
    if (scores[i].dim() != game.domain(i).dim()) {
      throw ShapeError("initial scores: wrong dimension for player " + std::to_string(i + 1));
    }
    s.actions.push_back(mirror_map(scores[i], game.domain(i)));
  }
  s.scores = std::move(scores);
  return s;
}

namespace {

struct Estimate {
  HermitianMatrix value;
  double noise_norm;
};

Estimate estimate_gradient(const GameModel& game, int i, const ActionProfile& at,
                           const NoiseModel& noise, Rng& rng, bool stochastic, long step) {
  const HermitianMatrix v = stochastic && game.has_stochastic_gradient()
                                ? game.stochastic_gradient(i, at, rng)
                                : game.payoff_gradient(i, at);
  if (!v.all_finite()) {
    throw NumericError("non-finite gradient for player " + std::to_string(i + 1) + " at step " +
                       std::to_string(step));
  }
  const Spectrahedron& dom = game.domain(i);
  HermitianMatrix est = restrict_to_blocks(hermitize(inject_noise(v, noise, rng)), dom);
  const double nn = noise.kind == NoiseModel::Kind::kNone ? 0.0 : dual_norm(est - restrict_to_blocks(v, dom));
  return {std::move(est), nn};
}

void advance_player(const GameModel& game, SolverState& state, int i, const HermitianMatrix& est,
                    double step, long n) {
  state.scores[i] += est * step;
  if (!state.scores[i].all_finite()) {
    throw NumericError("non-finite score for player " + std::to_string(i + 1) + " at step " +
                       std::to_string(n));
  }
  state.actions[i] = mirror_map(state.scores[i], game.domain(i));
}

}  // namespace

StepInfo mxl_step(const GameModel& game, SolverState& state, const StepSchedule& schedule,
                  const NoiseModel& noise, Rng& rng, bool stochastic) {
  const long n = state.n + 1;
  StepInfo info;
  info.step_size = schedule.at(n);
  std::vector<HermitianMatrix> est;
  for (int i = 0; i < game.num_players(); ++i) {
    Estimate e = estimate_gradient(game, i, state.actions, noise, rng, stochastic, n);
    info.noise_norm.push_back(e.noise_norm);
    info.estimate_norm.push_back(dual_norm(e.value));
    est.push_back(std::move(e.value));
  }
  for (int i = 0; i < game.num_players(); ++i) advance_player(game, state, i, est[i], info.step_size, n);
  state.n = n;
  return info;
}

// ---------------------------------------------------------------------------
// Runs

void SolverConfig::validate(const GameModel& game) const {
  schedule.validate();
  noise.validate();
  if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
  if (!(stop_residual >= 0.0)) throw ConfigError("stop_residual must be >= 0");
  if (log_every < 1) throw ConfigError("log_every must be >= 1");
  if (reference_point) {
    if (static_cast<int>(reference_point->size()) != game.num_players()) {
      throw ConfigError("reference point: one action per player required");
    }
    if (!is_feasible(game, *reference_point)) throw ConfigError("reference point is infeasible");
  }
  if (initial_scores) {
    if (static_cast<int>(initial_scores->size()) != game.num_players()) {
      throw ConfigError("initial scores: one matrix per player required");
    }
    for (int i = 0; i < game.num_players(); ++i) {
      if ((*initial_scores)[i].dim() != game.domain(i).dim()) {
        throw ConfigError("initial scores: wrong dimension for player " + std::to_string(i + 1));
      }
    }
  }
}

const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::kConverged:
      return "converged";
    case RunStatus::kMaxIters:
      return "max_iters";
    case RunStatus::kDiverged:
      return "diverged";
  }
  return "unknown";
}

void AsyncSchedule::validate(int num_players) const {
  if (update_prob.size() != 1 && static_cast<int>(update_prob.size()) != num_players) {
    throw ConfigError("async: update_prob needs one entry or one per player");
  }
  for (std::size_t i = 0; i < update_prob.size(); ++i) {
    if (!(update_prob[i] > 0.0 && update_prob[i] <= 1.0)) {
      throw ConfigError("async: update probability of player " + std::to_string(i + 1) +
                        " must lie in (0, 1]");
    }
  }
  if (max_delay < 0) throw ConfigError("async: max_delay must be >= 0");
}

namespace {

SolverState initial_state(const GameModel& game, const SolverConfig& config) {
  if (config.initial_scores) return SolverState::start_from_scores(game, *config.initial_scores);
  return SolverState::start(game);
}

TraceRecord make_record(const GameModel& game, const SolverConfig& config, const SolverState& s,
                        std::vector<double> steps, std::vector<double> noise) {
  TraceRecord r;
  r.n = s.n;
  r.step_size = steps.empty() ? 0.0 : *std::max_element(steps.begin(), steps.end());
  for (int i = 0; i < game.num_players(); ++i) r.utility.push_back(game.utility(i, s.actions));
  r.nash_residual = nash_residual(game, s.actions);
  if (config.reference_point) {
    double kl = 0.0;
    for (int i = 0; i < game.num_players(); ++i) {
      kl += std::max(0.0, fenchel_coupling((*config.reference_point)[i], s.scores[i], game.domain(i)));
    }
    r.kl_to_ref = kl;
  }
  r.noise_norm = std::move(noise);
  if (config.keep_actions) r.actions = s.actions;
  return r;
}

// Shared driver: `advance(k)` performs epoch k and returns per-player step sizes and noise norms.
template <typename Advance>
RunTrace drive(const GameModel& game, const SolverConfig& config, SolverState& state,
               std::vector<long>& counts, Advance advance) {
  RunTrace trace;
  trace.seed = config.seed;
  const int np = game.num_players();
  try {
    trace.records.push_back(
        make_record(game, config, state, std::vector<double>(np, 0.0), std::vector<double>(np, 0.0)));
    if (trace.records.back().nash_residual <= config.stop_residual) trace.status = RunStatus::kConverged;
    for (long k = 1; k <= config.max_iters && trace.status != RunStatus::kConverged; ++k) {
      auto info = advance(k);
      if (k % config.log_every != 0 && k != config.max_iters) continue;
      trace.records.push_back(make_record(game, config, state, std::move(info.first), std::move(info.second)));
      if (trace.records.back().nash_residual <= config.stop_residual) trace.status = RunStatus::kConverged;
    }
  } catch (const NumericError& e) {
    trace.status = RunStatus::kDiverged;
    trace.message = e.what();
    if (trace.records.empty()) {
      TraceRecord r;
      r.n = state.n;
      r.utility.assign(np, std::numeric_limits<double>::quiet_NaN());
      r.nash_residual = std::numeric_limits<double>::quiet_NaN();
      trace.records.push_back(std::move(r));
    }
  }
  trace.iterations = state.n;
  trace.final_actions = state.actions;
  trace.final_scores = state.scores;
  trace.update_counts = counts;
  return trace;
}

}  // namespace

RunTrace run(const GameModel& game, const SolverConfig& config) {
  config.validate(game);
  SolverState state = initial_state(game, config);
  Rng rng = make_rng(config.seed, 0);
  std::vector<long> counts(game.num_players(), 0);
  return drive(game, config, state, counts, [&](long) {
    const StepInfo info =
        mxl_step(game, state, config.schedule, config.noise, rng, config.stochastic_oracle);
    for (auto& c : counts) ++c;
    return std::make_pair(std::vector<double>(game.num_players(), info.step_size), info.noise_norm);
  });
}

RunTrace run_async(const GameModel& game, const SolverConfig& config,
                   const AsyncSchedule& schedule) {
  config.validate(game);
  schedule.validate(game.num_players());
  if (schedule.max_delay >= config.max_iters) throw ConfigError("async: max_delay must be < max_iters");
  const int np = game.num_players();
  SolverState state = initial_state(game, config);
  Rng noise_rng = make_rng(config.seed, 0);
  Rng clock_rng = make_rng(config.seed, 1);
  std::vector<long> counts(np, 0);
  std::vector<double> last_step(np, 0.0);
  std::deque<ActionProfile> history{state.actions};  // history[d] = X(k - 1 - d)

  return drive(game, config, state, counts, [&](long k) {
    std::vector<bool> active(np, false);
    if (schedule.mode == AsyncSchedule::Mode::kOneAtATime) {
      std::uniform_int_distribution<int> pick(0, np - 1);
      active[pick(clock_rng)] = true;
    } else {
      for (int i = 0; i < np; ++i) active[i] = schedule.prob(i) >= 1.0 || uniform01(clock_rng) < schedule.prob(i);
    }
    ActionProfile delayed = history.front();
    if (schedule.max_delay > 0) {
      std::uniform_int_distribution<int> lag(0, static_cast<int>(history.size()) - 1);
      for (int j = 0; j < np; ++j) delayed[j] = history[lag(clock_rng)][j];
    }
    std::vector<double> noise(np, 0.0);
    std::vector<HermitianMatrix> est(np);
    for (int i = 0; i < np; ++i) {
      if (!active[i]) continue;
      Estimate e = estimate_gradient(game, i, delayed, config.noise, noise_rng, config.stochastic_oracle, k);
      noise[i] = e.noise_norm;
      est[i] = std::move(e.value);
    }
    for (int i = 0; i < np; ++i) {
      if (!active[i]) continue;
      ++counts[i];
      last_step[i] = config.schedule.at(counts[i]);
      advance_player(game, state, i, est[i], last_step[i], k);
    }
    state.n = k;
    history.push_front(state.actions);
    if (static_cast<int>(history.size()) > schedule.max_delay + 1) history.pop_back();
    return std::make_pair(last_step, noise);
  });
}

// ---------------------------------------------------------------------------
// Output

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trace_csv(const RunTrace& trace) {
  std::ostringstream out;
  out << "n,player,utility,nash_residual,kl_to_ref,step_size\n";
  for (const auto& r : trace.records) {
    for (std::size_t i = 0; i < r.utility.size(); ++i) {
      out << r.n << ',' << i + 1 << ',' << format_double(r.utility[i]) << ','
          << format_double(r.nash_residual) << ',' << (r.kl_to_ref ? format_double(*r.kl_to_ref) : "")
          << ',' << format_double(r.step_size) << '\n';
    }
  }
  return out.str();
}

}  // namespace mxl
