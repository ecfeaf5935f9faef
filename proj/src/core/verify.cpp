#include "mxl/verify.hpp"

#include "mxl/errors.hpp"
#include "mxl/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mxl {

// ---------------------------------------------------------------------------
// Best-response oracle

namespace {

double scalar_best_response(const GameModel& game, int i, ActionProfile x, int grid_points) {
  const double a = game.domain(i).trace_bound();
  auto f = [&](double t) {
    x[i] = HermitianMatrix::scalar(t);
    return game.utility(i, x);
  };
  int best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < grid_points; ++k) {
    const double v = f(a * k / (grid_points - 1));
    if (v > best_val) {
      best_val = v;
      best = k;
    }
  }
  double lo = a * std::max(best - 1, 0) / (grid_points - 1);
  double hi = a * std::min(best + 1, grid_points - 1) / (grid_points - 1);
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - ratio * (hi - lo), d = lo + ratio * (hi - lo);
  double fc = f(c), fd = f(d);
  while (hi - lo > 1e-14 * std::max(1.0, a)) {
    if (fc >= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - ratio * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + ratio * (hi - lo);
      fd = f(d);
    }
  }
  const double t = 0.5 * (lo + hi);
  // Endpoints can beat the interior bracket when the maximizer sits on the boundary.
  double arg = t, val = f(t);
  for (double e : {0.0, a}) {
    const double v = f(e);
    if (v > val) {
      val = v;
      arg = e;
    }
  }
  return arg;
}

HermitianMatrix matrix_best_response(const GameModel& game, int i, ActionProfile x, int iters) {
  const Spectrahedron& dom = game.domain(i);
  double eta = 1.0;
  double u = game.utility(i, x);
  for (int k = 0; k < iters; ++k) {
    const HermitianMatrix v = game.payoff_gradient(i, x);
    const HermitianMatrix cur = x[i];
    bool moved = false;
    for (int bt = 0; bt < 60; ++bt) {
      const HermitianMatrix cand = project_to_spectrahedron(cur + v * eta, dom);
      const HermitianMatrix step = cand - cur;
      const double gain = trace_inner(v, step);
      x[i] = cand;
      const double uc = game.utility(i, x);
      if (uc >= u + 1e-4 * gain) {
        moved = step.matrix().norm() > 1e-15;
        u = uc;
        break;
      }
      x[i] = cur;
      eta *= 0.5;
    }
    if (!moved) break;
    eta = std::min(eta * 2.0, 1e6);
  }
  return x[i];
}

}  // namespace

BruteForceResult brute_force_ne(const GameModel& game, const BruteForceOptions& options,
                                std::optional<ActionProfile> start) {
  if (options.tolerance <= 0.0 || options.max_rounds < 1 || options.grid_points < 3) {
    throw ConfigError("brute_force_ne: invalid options");
  }
  BruteForceResult r;
  r.profile = start ? *start : uniform_interior_profile(game);
  require_feasible(game, r.profile);
  for (r.rounds = 1; r.rounds <= options.max_rounds; ++r.rounds) {
    double change = 0.0;
    for (int i = 0; i < game.num_players(); ++i) {
      const HermitianMatrix prev = r.profile[i];
      if (game.domain(i).dim() == 1) {
        r.profile[i] = HermitianMatrix::scalar(scalar_best_response(game, i, r.profile, options.grid_points));
      } else {
        r.profile[i] = matrix_best_response(game, i, r.profile, options.inner_iters);
      }
      change = std::max(change, nuclear_norm(r.profile[i] - prev));
    }
    r.residual = nash_residual(game, r.profile);
    if (r.residual <= options.tolerance) {
      r.converged = true;
      r.message = "converged";
      return r;
    }
    if (change == 0.0) break;
  }
  r.rounds = std::min(r.rounds, options.max_rounds);
  r.message = "best-response iteration did not settle: residual " + std::to_string(r.residual) +
              " after " + std::to_string(r.rounds) + " rounds";
  return r;
}

double profile_divergence(const GameModel& game, const ActionProfile& xstar, const ActionProfile& x) {
  double d = 0.0;
  for (int i = 0; i < game.num_players(); ++i) d += bregman_divergence(xstar[i], x[i], game.domain(i));
  return d;
}

// ---------------------------------------------------------------------------
// Strong stability

StrongStabilityEstimate estimate_strong_stability(const GameModel& game, const ActionProfile& xstar,
                                                  int samples, std::uint64_t seed, double radius) {
  if (samples < 1) throw ConfigError("estimate_strong_stability: samples must be >= 1");
  if (!(radius > 0.0)) throw ConfigError("estimate_strong_stability: radius must be > 0");
  require_feasible(game, xstar);
  std::vector<double> ratio(samples, std::numeric_limits<double>::quiet_NaN());
  parallel_for(static_cast<std::size_t>(samples), [&](std::size_t k) {
    Rng rng = make_rng(seed, k);
    ActionProfile x = random_profile(game, rng);
    if (std::isfinite(radius)) {
      const double dist = profile_distance(x, xstar);
      const double u = uniform01(rng);
      x = profile_lerp(xstar, x, dist > 0.0 ? std::min(1.0, u * radius / dist) : 0.0);
    }
    const double div = profile_divergence(game, xstar, x);
    if (!(div > 1e-9) || !std::isfinite(div)) return;
    double inner = 0.0;
    for (int i = 0; i < game.num_players(); ++i) {
      inner += trace_inner(x[i] - xstar[i], game.payoff_gradient(i, x));
    }
    ratio[k] = -inner / div;
  });
  StrongStabilityEstimate e;
  e.samples = samples;
  e.seed = seed;
  e.radius = radius;
  for (double r : ratio) {
    if (std::isnan(r)) continue;
    ++e.used;
    if (r < 0.0) ++e.violation_count;
    e.min_ratio = std::min(e.min_ratio, r);
  }
  e.b_hat = e.used > 0 ? std::max(0.0, e.min_ratio) : 0.0;
  return e;
}

// ---------------------------------------------------------------------------
// Rates

const char* to_string(RateMetric m) { return m == RateMetric::kKl ? "kl" : "nuclear_distance"; }

LogLogFit fit_log_log(const std::vector<long>& n, const std::vector<double>& values) {
  const std::size_t k = n.size();
  if (k < 2 || values.size() != k) throw ConfigError("fit_log_log: need matching series of length >= 2");
  std::vector<double> lx(k), ly(k);
  for (std::size_t j = 0; j < k; ++j) {
    lx[j] = std::log(static_cast<double>(n[j]));
    ly[j] = std::log(values[j]);
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / k;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / k;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    sxx += (lx[j] - mx) * (lx[j] - mx);
    sxy += (lx[j] - mx) * (ly[j] - my);
  }
  LogLogFit f{sxy / sxx, 0.0, 0.0};
  f.intercept = my - f.slope * mx;
  if (k > 2) {
    double sse = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double e = ly[j] - f.intercept - f.slope * lx[j];
      sse += e * e;
    }
    f.slope_stderr = std::sqrt(sse / static_cast<double>(k - 2) / sxx);
  }
  return f;
}

namespace {

void mean_and_stderr(const std::vector<std::vector<double>>& per_seed, std::size_t j, double& mean,
                     double& stderr_out) {
  const double m = static_cast<double>(per_seed.size());
  double s = 0.0;
  for (const auto& row : per_seed) s += row[j];
  mean = s / m;
  double ss = 0.0;
  for (const auto& row : per_seed) ss += (row[j] - mean) * (row[j] - mean);
  stderr_out = m > 1 ? std::sqrt(ss / (m - 1.0) / m) : 0.0;
}

}  // namespace

RateFit rate_experiment(const GameModel& game, const ActionProfile& xstar, const RateConfig& config) {
  const auto& cp = config.checkpoints;
  if (cp.size() < 4) throw ConfigError("rate experiment: need at least 4 checkpoints");
  for (std::size_t j = 0; j < cp.size(); ++j) {
    if (cp[j] < 1 || (j > 0 && cp[j] <= cp[j - 1])) {
      throw ConfigError("rate experiment: checkpoints must be positive and increasing");
    }
  }
  if (std::log10(static_cast<double>(cp.back()) / cp.front()) < 2.0 - 1e-9) {
    throw ConfigError("rate experiment: checkpoints must span at least two decades");
  }
  if (config.seeds < 1) throw ConfigError("rate experiment: seeds must be >= 1");
  config.schedule.validate();
  config.noise.validate();
  require_feasible(game, xstar);

  const std::size_t nc = cp.size();
  std::vector<std::vector<double>> dist(config.seeds, std::vector<double>(nc));
  std::vector<std::vector<double>> kl(config.seeds, std::vector<double>(nc));
  std::vector<double> vmax(config.seeds, 0.0);
  parallel_for(static_cast<std::size_t>(config.seeds), [&](std::size_t s) {
    SolverState st = config.initial_scores ? SolverState::start_from_scores(game, *config.initial_scores)
                                           : SolverState::start(game);
    Rng rng = make_rng(config.seed, s);
    std::size_t next = 0;
    while (next < nc) {
      const StepInfo info = mxl_step(game, st, config.schedule, config.noise, rng, config.stochastic_oracle);
      for (double v : info.estimate_norm) vmax[s] = std::max(vmax[s], v);
      if (st.n == cp[next]) {
        dist[s][next] = profile_distance(st.actions, xstar);
        double k = 0.0;
        for (int i = 0; i < game.num_players(); ++i) {
          k += std::max(0.0, fenchel_coupling(xstar[i], st.scores[i], game.domain(i)));
        }
        kl[s][next] = k;
        ++next;
      }
    }
  });

  RateFit fit;
  fit.checkpoints = cp;
  fit.seeds = config.seeds;
  fit.v_hat = *std::max_element(vmax.begin(), vmax.end());
  fit.distance_mean.resize(nc);
  fit.distance_stderr.resize(nc);
  fit.kl_mean.resize(nc);
  fit.kl_stderr.resize(nc);
  for (std::size_t j = 0; j < nc; ++j) {
    mean_and_stderr(dist, j, fit.distance_mean[j], fit.distance_stderr[j]);
    mean_and_stderr(kl, j, fit.kl_mean[j], fit.kl_stderr[j]);
  }
  const bool use_kl = config.metric == RateMetric::kKl;
  fit.values = use_kl ? fit.kl_mean : fit.distance_mean;
  fit.stderrs = use_kl ? fit.kl_stderr : fit.distance_stderr;
  const LogLogFit f = fit_log_log(cp, fit.values);
  fit.slope = f.slope;
  fit.slope_stderr = f.slope_stderr;
  fit.intercept = f.intercept;
  fit.monotone = true;
  for (std::size_t j = 1; j < nc; ++j) fit.monotone = fit.monotone && fit.values[j] < fit.values[j - 1];

  fit.b_hat = config.b_hat;
  const auto gamma = config.schedule.harmonic_coefficient();
  if (config.b_hat && gamma) {
    const double b = *config.b_hat;
    fit.gamma_b = *gamma * b;
    fit.gamma_b_flag = *fit.gamma_b <= 1.0;
    if (!fit.gamma_b_flag) {
      bool ok = true;
      for (std::size_t j = 0; j < nc; ++j) {
        const double bound = *gamma * *gamma * fit.v_hat * fit.v_hat / ((b * *gamma - 1.0) * cp[j]);
        fit.kl_bound.push_back(bound);
        const double rel = fit.kl_mean[j] > 0.0 ? fit.kl_stderr[j] / fit.kl_mean[j] : 0.0;
        ok = ok && fit.kl_mean[j] <= bound * (1.0 + 3.0 * rel);
      }
      fit.bound_ok = ok;
    }
  }
  return fit;
}

// ---------------------------------------------------------------------------

bool is_extreme_profile(const GameModel& game, const ActionProfile& x, double tol) {
  for (int i = 0; i < game.num_players(); ++i) {
    const double a = game.domain(i).trace_bound();
    const RVector ev = x[i].eigenvalues();
    const double tr = x[i].trace();
    if (tr <= tol * a) continue;
    const int big = static_cast<int>((ev.array() > tol * a).count());
    if (big != 1 || std::abs(tr - a) > tol * a) return false;
  }
  return true;
}

bool is_interior_profile(const GameModel& game, const ActionProfile& x, double tol) {
  for (int i = 0; i < game.num_players(); ++i) {
    const double a = game.domain(i).trace_bound();
    if (x[i].eigenvalues().minCoeff() <= tol * a || x[i].trace() >= a * (1.0 - tol)) return false;
  }
  return true;
}

}  // namespace mxl
