#include "doctest.h"

#include "../helpers.hpp"
#include "mxl/errors.hpp"
#include "mxl/games.hpp"

#include <cmath>
#include <complex>

using namespace mxl;

namespace {

ActionProfile scalars(std::vector<double> v) { return MacGame::from_scalars(v); }

// Grid best-response iteration on a 1e-6 grid for the symmetric 2-player game.
double mac_grid_fixed_point(const MacGame& g) {
  const int n = 1000000;
  std::vector<double> x{0.5, 0.5};
  for (int round = 0; round < 60; ++round) {
    for (int i = 0; i < 2; ++i) {
      double best = -INFINITY, arg = 0.0;
      std::vector<double> y = x;
      for (int k = 0; k <= n; ++k) {
        y[i] = static_cast<double>(k) / n;
        const double u = g.scalar_utility(i, y);
        if (u > best) best = u, arg = y[i];
      }
      x[i] = arg;
    }
  }
  return x[0];
}

// Direct evaluation of the metric objective over all triples.
double metric_objective_direct(const MetricLearningGame& g, const CMatrix& xc) {
  const auto& pts = g.data().points;
  const Eigen::MatrixXd x = xc.real();
  double loss = 0.0;
  for (const Triple& t : g.triples()) {
    const RVector a = pts[t.anchor] - pts[t.similar];
    const RVector b = pts[t.anchor] - pts[t.dissimilar];
    const double arg = a.dot(x * a) - b.dot(x * b) - g.params().margin;
    loss += smooth_hinge(arg, g.params().hinge_width);
  }
  const CMatrix d = xc - CMatrix::Identity(x.rows(), x.cols());
  return loss / g.triples().size() + d.squaredNorm();
}

EeGame ee_game(int users, int m, int nr, int s, std::uint64_t seed, double spread = 10.0) {
  return EeGame(synth_channels(users, m, nr, s, spread, seed), PowerParams{2.0, 0.1});
}

}  // namespace

TEST_CASE("medium access utilities") {
  MacGame g(2, MacUtility::quadratic(1.0, 2.0));
  CHECK(g.contention(0, {0.3, 0.7}) == doctest::Approx(0.7));
  CHECK(g.contention(1, {0.3, 0.7}) == doctest::Approx(0.3));
  CHECK(g.scalar_gradient(0, {0.4, 0.0}) == doctest::Approx(1.0 - 2.0 * 0.4));
  CHECK(g.scalar_utility(0, {0.4, 0.5}) == doctest::Approx(0.4 - 0.16 - 0.2));

  MacGame g3(3, MacUtility::quadratic(1.0, 2.5));
  CHECK(g3.contention(0, {0.9, 0.5, 0.2}) == doctest::Approx(1.0 - 0.5 * 0.8));
  CHECK(g3.scalar_gradient(2, {0.0, 0.0, 0.6}) == doctest::Approx(1.0 - 2.5 * 0.6));

  MacUtility lu = MacUtility::log_utility(2.0);
  CHECK(lu.value(1.0) == doctest::Approx(2.0 * std::log(2.0)));
  CHECK(lu.derivative(0.5) == doctest::Approx(2.0 / 1.5));
  CHECK_THROWS_AS(MacGame(0, MacUtility::quadratic(1.0, 2.0)), ConfigError);
}

TEST_CASE("medium access equilibrium against a grid oracle") {
  MacGame g(2, MacUtility::quadratic(1.0, 2.0));
  const auto x = g.symmetric_equilibrium();
  REQUIRE(x.has_value());
  CHECK(*x == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(std::abs(mac_grid_fixed_point(g) - 1.0 / 3.0) <= 1e-6);
  CHECK(nash_residual(g, scalars({*x, *x})) < 1e-12);
}

TEST_CASE("medium access family with c > N - 1 is monotone") {
  for (int n : {2, 3, 4}) {
    MacGame g(n, MacUtility::quadratic(1.0, n - 1 + 0.5));
    CHECK(check_monotonicity(g, 10000, 31 + n).monotonicity_violations == 0);
  }
}

TEST_CASE("medium access gradients") {
  MacGame g(3, MacUtility::quadratic(1.0, 2.5));
  MacGame lg(2, MacUtility::log_utility(1.0));
  Rng rng = make_rng(701, 0);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> v{0.05 + 0.9 * uniform01(rng), 0.05 + 0.9 * uniform01(rng), 0.05 + 0.9 * uniform01(rng)};
    for (int i = 0; i < 3; ++i) CHECK(finite_diff_gradient_check(g, i, scalars(v), 4, 1e-5, t) < 1e-9);
    v.pop_back();
    CHECK(finite_diff_gradient_check(lg, 0, scalars(v), 4, 1e-5, t) < 1e-8);
  }
}

TEST_CASE("analytic fixtures") {
  LinearGame lin(HermitianMatrix::diagonal(RVector{{2.0, 1.0}}));
  const auto m = lin.maximizer();
  CHECK(m[0](0, 0).real() == doctest::Approx(1.0));
  CHECK(std::abs(m[0](1, 1)) < 1e-12);
  CHECK_THROWS(LinearGame(HermitianMatrix::identity(2)).maximizer());

  TwoEquilibriumGame two;
  CHECK(two.stable_point() == doctest::Approx(0.25));
  CHECK(nash_residual(two, scalars({0.25, 0.25})) < 1e-12);
  CHECK(nash_residual(two, scalars({1.0, 1.0})) < 1e-12);
  CHECK(nash_residual(two, scalars({0.6, 0.6})) > 1e-3);
  CHECK_THROWS_AS(TwoEquilibriumGame(0.5, 0.8), ConfigError);
}

TEST_CASE("smooth hinge") {
  CHECK(smooth_hinge(-1.0, 0.1) == 0.0);
  CHECK(smooth_hinge(0.05, 0.1) == doctest::Approx(0.0125));
  CHECK(smooth_hinge(0.3, 0.1) == doctest::Approx(0.25));
  CHECK(smooth_hinge_derivative(0.05, 0.1) == doctest::Approx(0.5));
  // Continuous with a continuous derivative at both joints.
  CHECK(smooth_hinge(0.1 + 1e-12, 0.1) == doctest::Approx(smooth_hinge(0.1, 0.1)));
  CHECK(smooth_hinge_derivative(0.1 + 1e-12, 0.1) == doctest::Approx(1.0));
}

TEST_CASE("metric learning data") {
  const MetricDataset d = synth_clusters(5, 2, 20, 3.0, 5);
  CHECK(d.points.size() == 40);
  const auto t = build_triples(d);
  CHECK(t.size() == 40u * 19u * 20u);
  for (const Triple& tr : t) {
    CHECK(d.labels[tr.anchor] == d.labels[tr.similar]);
    CHECK(d.labels[tr.anchor] != d.labels[tr.dissimilar]);
  }
  const MetricDataset again = synth_clusters(5, 2, 20, 3.0, 5);
  CHECK(again.points[17] == d.points[17]);

  MetricDataset single = d;
  for (auto& l : single.labels) l = 0;
  CHECK_THROWS_AS(MetricLearningGame(single, MetricParams{}), ConfigError);

  const auto j = dataset_to_json(d);
  const MetricDataset back = dataset_from_json(j);
  CHECK(back.points.size() == d.points.size());
  CHECK(back.points[3] == d.points[3]);
  CHECK(back.labels == d.labels);
}

TEST_CASE("metric learning objective and gradients") {
  MetricLearningGame g(synth_clusters(5, 2, 20, 3.0, 5), MetricParams{});
  Rng rng = make_rng(801, 0);
  for (int t = 0; t < 5; ++t) {
    const HermitianMatrix x = random_spectrahedron_point(g.domain(0), rng);
    CHECK(g.objective(x) == doctest::Approx(metric_objective_direct(g, x.matrix())).epsilon(1e-12));
    CHECK(finite_diff_gradient_check(g, 0, {x}, 10, 1e-5, 40 + t) < 1e-6);
  }

  // Far apart clusters: every triple sits in the flat part of the hinge, only the regularizer remains.
  MetricParams flat;
  flat.margin = 1e-3;
  MetricLearningGame far(synth_clusters(3, 2, 5, 50.0, 2), flat);
  const HermitianMatrix x = HermitianMatrix::identity(3) * 0.5;
  std::vector<int> batch(far.triples().size());
  for (std::size_t k = 0; k < batch.size(); ++k) batch[k] = static_cast<int>(k);
  const HermitianMatrix grad = far.minibatch_gradient(x, batch);
  CHECK(testing::max_abs_diff(grad, (x - HermitianMatrix::identity(3)) * 2.0) < 1e-12);
}

TEST_CASE("metric learning identity is not optimal") {
  // Trace cap above d so that X = I is feasible.
  MetricParams params;
  params.trace_cap = 6.0;
  MetricLearningGame g(synth_clusters(5, 2, 20, 3.0, 5), params);
  const HermitianMatrix eye = HermitianMatrix::identity(5);
  REQUIRE(g.domain(0).contains(eye));
  // Full-batch projected gradient descent from the identity.
  HermitianMatrix x = eye;
  for (int k = 0; k < 500; ++k) x = project_to_spectrahedron(x - g.objective_gradient(x) * 0.05, g.domain(0));
  CHECK(g.objective(eye) > g.objective(x) + 1e-6);
  CHECK(nuclear_norm(g.objective_gradient(x)) < nuclear_norm(g.objective_gradient(eye)));
}

TEST_CASE("metric learning minibatch gradient is unbiased") {
  MetricLearningGame g(synth_clusters(3, 2, 6, 1.0, 9), MetricParams{0.1, 2.0, 0.1, 4});
  Rng rng = make_rng(802, 0);
  const HermitianMatrix x = random_spectrahedron_point(g.domain(0), rng);
  const HermitianMatrix full = g.payoff_gradient(0, {x});
  const int draws = 10000;
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(3, 3), sq = Eigen::MatrixXd::Zero(3, 3);
  for (int t = 0; t < draws; ++t) {
    const Eigen::MatrixXd s = g.stochastic_gradient(0, {x}, rng).matrix().real();
    sum += s;
    sq += s.cwiseProduct(s);
  }
  const Eigen::MatrixXd mean = sum / draws;
  const Eigen::MatrixXd var = sq / draws - mean.cwiseProduct(mean);
  int outside = 0;
  for (int j = 0; j < 3; ++j)
    for (int k = 0; k < 3; ++k) {
      const double se = std::sqrt(var(j, k) / draws);
      if (std::abs(mean(j, k) - full.matrix().real()(j, k)) > 3.0 * se + 1e-12) ++outside;
    }
  CHECK(outside <= 1);
}

TEST_CASE("power transforms") {
  const PowerParams p{2.0, 0.1};
  CHECK(testing::max_abs_diff(transform_q_to_x(HermitianMatrix::zero(2), p), HermitianMatrix::zero(2)) == 0.0);
  const HermitianMatrix full = HermitianMatrix::diagonal(RVector{{1.5, 0.5}});
  CHECK(transform_q_to_x(full, p).trace() == doctest::Approx(1.0));
  CHECK(transform_x_to_q(HermitianMatrix::diagonal(RVector{{0.25, 0.75}}), p).trace() == doctest::Approx(2.0));
  Rng rng = make_rng(901, 0);
  for (int t = 0; t < 100; ++t) {
    const HermitianMatrix q = random_spectrahedron_point(Spectrahedron(3, p.p_max), rng);
    const HermitianMatrix x = transform_q_to_x(q, p);
    CHECK(Spectrahedron(3, 1.0).contains(x));
    CHECK(testing::max_abs_diff(transform_q_to_x(transform_x_to_q(x, p), p), x) < 1e-12);
    CHECK(testing::max_abs_diff(transform_x_to_q(x, p), q) < 1e-10);
  }
  CHECK_THROWS_AS(transform_q_to_x(HermitianMatrix::identity(2) * 1.5, p), DomainError);
  CHECK_THROWS_AS(transform_x_to_q(HermitianMatrix::identity(2) * 0.6, p), DomainError);
}

TEST_CASE("synthetic channels") {
  const ChannelSet a = synth_channels(2, 2, 2, 2, 10.0, 3);
  const ChannelSet b = synth_channels(2, 2, 2, 2, 10.0, 3);
  CHECK(a.link(0, 1, 1) == b.link(0, 1, 1));
  CHECK_FALSE(a.link(0, 1, 1) == synth_channels(2, 2, 2, 2, 10.0, 4).link(0, 1, 1));
  CHECK_FALSE(a.link(0, 1, 1) == synth_channels(2, 2, 2, 2, 10.0, 3, 0.0, 1).link(0, 1, 1));

  // Unit average gain with zero spread: E tr(H H^dagger) = M Nrx.
  double acc = 0.0;
  const int draws = 1000;
  for (int e = 0; e < draws; ++e) {
    const ChannelSet c = synth_channels(1, 2, 3, 1, 0.0, 11, 0.0, e);
    acc += (c.link(0, 0, 0) * c.link(0, 0, 0).adjoint()).trace().real();
  }
  CHECK(acc / draws == doctest::Approx(6.0).epsilon(0.05));

  const auto j = channels_to_json(a);
  const ChannelSet back = channels_from_json(j);
  CHECK(back.link(1, 0, 1) == a.link(1, 0, 1));
  CHECK(back.seed == a.seed);
  CHECK(channels_to_json(back).dump() == j.dump());
  nlohmann::json broken = j;
  broken["version"] = 99;
  CHECK_THROWS_AS(channels_from_json(broken), ConfigError);
}

TEST_CASE("energy efficiency utility") {
  const EeGame g = ee_game(2, 2, 2, 2, 1);
  CHECK(g.domain(0).dim() == 4);
  CHECK(g.domain(0).blocks() == std::vector<int>{2, 2});

  ActionProfile x = g.uniform_baseline();
  for (int i = 0; i < 2; ++i) {
    CHECK(std::isfinite(g.utility(i, x)));
    CHECK(g.utility(i, x) > 0.0);
    CHECK(g.utility(i, x) == doctest::Approx(g.energy_efficiency(i, g.to_covariances(x))).epsilon(1e-12));
  }
  // Baseline: Q = (Pmax / 2) / (M S) I.
  const auto q = g.to_covariances(x);
  CHECK(testing::max_abs_diff(q[0], HermitianMatrix::identity(4) * 0.25) < 1e-12);
  CHECK(g.domain(0).contains(x[0]));

  x[0] = HermitianMatrix::zero(4);
  CHECK(g.utility(0, x) == 0.0);
  CHECK(g.energy_efficiency(0, g.to_covariances(x)) == 0.0);

  Rng rng = make_rng(1001, 0);
  for (int t = 0; t < 20; ++t) {
    const ActionProfile r = random_profile(g, rng);
    for (int i = 0; i < 2; ++i)
      CHECK(g.utility(i, r) == doctest::Approx(g.energy_efficiency(i, g.to_covariances(r))).epsilon(1e-10));
  }
}

TEST_CASE("energy efficiency single-user scalar reduction") {
  const EeGame g = ee_game(1, 1, 1, 1, 17, 6.0);
  const double pc = 0.1, pm = 2.0;
  const double h2 = std::norm(g.channels().link(0, 0, 0)(0, 0));
  for (double x : {0.0, 0.1, 0.5, 0.9, 1.0}) {
    const double headroom = pc + (1.0 - x) * pm;
    const double expected = headroom / (pc * (pc + pm)) * std::log(1.0 + pc * pm * h2 * x / headroom);
    const ActionProfile a{HermitianMatrix::scalar(x)};
    CHECK(g.utility(0, a) == doctest::Approx(expected).epsilon(1e-12));
    // Direct rate over power after inverting the transform.
    const double q = pc * pm * x / headroom;
    CHECK(g.utility(0, a) == doctest::Approx(std::log(1.0 + h2 * q) / (pc + q)).epsilon(1e-12));
  }
}

TEST_CASE("energy efficiency gradient") {
  Rng rng = make_rng(1002, 0);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const EeGame g = ee_game(2, 2, 2, 2, seed);
    for (int t = 0; t < 5; ++t) {
      const ActionProfile x = random_profile(g, rng);
      for (int i = 0; i < 2; ++i) {
        CHECK(finite_diff_gradient_check(g, i, x, 10, 1e-6, 100 * seed + t) < 1e-5);
        const HermitianMatrix v = g.payoff_gradient(i, x);
        CHECK(g.domain(i).off_block_mass(v) < 1e-12);
      }
    }
  }
  const EeGame three = ee_game(3, 2, 3, 1, 4);
  const ActionProfile x = random_profile(three, rng);
  for (int i = 0; i < 3; ++i) CHECK(finite_diff_gradient_check(three, i, x, 10, 1e-6, 9) < 1e-5);
}

TEST_CASE("energy efficiency is invariant under a change of basis") {
  // Conjugating user 0's covariance by U and its direct channel by U^dagger leaves the rate unchanged.
  const ChannelSet ch = synth_channels(2, 2, 2, 1, 10.0, 5);
  const EeGame g(ch, PowerParams{2.0, 0.1});
  Rng rng = make_rng(1003, 0);
  const ActionProfile x = random_profile(g, rng);
  const CMatrix u = haar_unitary(2, rng);
  ChannelSet rotated = ch;
  rotated.h[0][0][0] = ch.link(0, 0, 0) * u.adjoint();
  rotated.h[0][1][0] = ch.link(0, 1, 0) * u.adjoint();
  const EeGame gr(rotated, PowerParams{2.0, 0.1});
  ActionProfile xr = x;
  xr[0] = hermitize(u * x[0].matrix() * u.adjoint());
  for (int i = 0; i < 2; ++i) CHECK(gr.utility(i, xr) == doctest::Approx(g.utility(i, x)).epsilon(1e-9));
}
