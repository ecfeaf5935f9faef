#pragma once

// Example game families: contention-based medium access, Mahalanobis metric
// learning with a trace cap, and energy-efficiency maximization in
// multi-carrier MIMO links; plus small analytic games used as test fixtures.

#include "mxl/game.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <vector>

namespace mxl {

// ---------------------------------------------------------------------------
// Medium access: x_i in [0,1], u_i = U_i(x_i) - x_i q_i(x_-i),
// q_i = 1 - prod_{j != i} (1 - x_j).

struct MacUtility {
  enum class Kind { kQuadratic, kLog };
  Kind kind = Kind::kQuadratic;
  double b = 1.0;  // quadratic: U(x) = b x - (c/2) x^2
  double c = 2.0;
  double a = 1.0;  // log: U(x) = a log(1 + x)

  static MacUtility quadratic(double b, double c) { return {Kind::kQuadratic, b, c, 1.0}; }
  static MacUtility log_utility(double a) { return {Kind::kLog, 1.0, 2.0, a}; }
  double value(double x) const;
  double derivative(double x) const;
};

class MacGame final : public GameModel {
 public:
  MacGame(int num_players, MacUtility utility);

  std::string name() const override { return "mac"; }
  const std::vector<PlayerSpec>& players() const override { return players_; }
  double utility(int i, const ActionProfile& x) const override;
  HermitianMatrix payoff_gradient(int i, const ActionProfile& x) const override;

  const MacUtility& access_utility() const { return utility_; }
  double contention(int i, const std::vector<double>& x) const;
  double scalar_utility(int i, const std::vector<double>& x) const;
  double scalar_gradient(int i, const std::vector<double>& x) const;

  /// Symmetric interior equilibrium of the quadratic family, when it exists:
  /// solves b - c x - q(x) = 0 for x in (0, 1).
  std::optional<double> symmetric_equilibrium() const;

  static std::vector<double> to_scalars(const ActionProfile& x);
  static ActionProfile from_scalars(const std::vector<double>& x);

 private:
  std::vector<PlayerSpec> players_;
  MacUtility utility_;
};

// ---------------------------------------------------------------------------
// Small analytic games.

/// Single player, u(X) = Re tr(C X).
class LinearGame final : public GameModel {
 public:
  LinearGame(HermitianMatrix c, double trace_bound = 1.0);
  std::string name() const override { return "linear"; }
  const std::vector<PlayerSpec>& players() const override { return players_; }
  double utility(int, const ActionProfile& x) const override;
  HermitianMatrix payoff_gradient(int, const ActionProfile&) const override { return c_; }
  const HermitianMatrix& cost() const { return c_; }
  /// trace_bound * v v^dagger for the top eigenvector v (requires a positive, simple top eigenvalue).
  ActionProfile maximizer() const;

 private:
  HermitianMatrix c_;
  std::vector<PlayerSpec> players_;
};

/// Every utility is identically zero.
class ZeroGame final : public GameModel {
 public:
  explicit ZeroGame(std::vector<Spectrahedron> domains);
  std::string name() const override { return "zero"; }
  const std::vector<PlayerSpec>& players() const override { return players_; }
  double utility(int, const ActionProfile&) const override { return 0.0; }
  HermitianMatrix payoff_gradient(int i, const ActionProfile&) const override {
    return HermitianMatrix::zero(domain(i).dim());
  }

 private:
  std::vector<PlayerSpec> players_;
};

/// Two players on [0,1] with u_i = -(x_i - f(x_j))^2 / 2, f(x) = base + curvature x^2.
/// With base = 0.2, curvature = 0.8 the Nash equilibria are (1/4, 1/4), locally
/// stable, and (1, 1), an unstable extreme point.
class TwoEquilibriumGame final : public GameModel {
 public:
  TwoEquilibriumGame(double base = 0.2, double curvature = 0.8);
  std::string name() const override { return "two_equilibrium"; }
  const std::vector<PlayerSpec>& players() const override { return players_; }
  double utility(int i, const ActionProfile& x) const override;
  HermitianMatrix payoff_gradient(int i, const ActionProfile& x) const override;

  double response(double other) const { return base_ + curvature_ * other * other; }
  /// Smaller root of f(x) = x, the locally stable equilibrium.
  double stable_point() const;

 private:
  double base_;
  double curvature_;
  std::vector<PlayerSpec> players_;
};

// ---------------------------------------------------------------------------
// Metric learning: minimize mean_T C(d_X(i,j) - d_X(i,k) - margin) + ||X - I||_F^2
// over {X >= 0, tr X <= trace_cap}. The game's utility is the negated objective.

struct MetricDataset {
  int dim = 0;
  std::vector<RVector> points;
  std::vector<int> labels;
  std::uint64_t seed = 0;
};

/// Gaussian clusters in R^dim; cluster means differ along the first coordinates
/// and the within-cluster spread is anisotropic.
MetricDataset synth_clusters(int dim, int clusters, int points_per_cluster, double separation,
                             std::uint64_t seed);

struct Triple {
  int anchor;
  int similar;
  int dissimilar;
};

/// All (i, j, k) with label_j == label_i, j != i and label_k != label_i.
std::vector<Triple> build_triples(const MetricDataset& data);

struct MetricParams {
  double margin = 0.1;
  double trace_cap = 2.0;
  double hinge_width = 0.1;  // smoothing width of the penalty
  int minibatch = 16;
};

/// Smooth hinge: 0 for t < 0, t^2 / (2w) on [0, w], t - w/2 beyond.
double smooth_hinge(double t, double width);
double smooth_hinge_derivative(double t, double width);

class MetricLearningGame final : public GameModel {
 public:
  MetricLearningGame(MetricDataset data, MetricParams params);

  std::string name() const override { return "metric"; }
  const std::vector<PlayerSpec>& players() const override { return players_; }
  double utility(int, const ActionProfile& x) const override { return -objective(x[0]); }
  HermitianMatrix payoff_gradient(int, const ActionProfile& x) const override {
    return objective_gradient(x[0]) * -1.0;
  }
  bool has_stochastic_gradient() const override { return true; }
  /// Negated minibatch gradient over params.minibatch triples drawn uniformly with replacement.
  HermitianMatrix stochastic_gradient(int, const ActionProfile& x, Rng& rng) const override;

  double objective(const HermitianMatrix& x) const;
  HermitianMatrix objective_gradient(const HermitianMatrix& x) const;
  double minibatch_objective(const HermitianMatrix& x, std::span<const int> batch) const;
  HermitianMatrix minibatch_gradient(const HermitianMatrix& x, std::span<const int> batch) const;
  std::vector<int> draw_minibatch(Rng& rng) const;

  const MetricDataset& data() const { return data_; }
  const MetricParams& params() const { return params_; }
  const std::vector<Triple>& triples() const { return triples_; }

 private:
  MetricDataset data_;
  MetricParams params_;
  std::vector<Triple> triples_;
  std::vector<PlayerSpec> players_;
};

// ---------------------------------------------------------------------------
// Energy efficiency in multi-user, multi-carrier MIMO.

/// Channel matrices H[from][to][subcarrier], each rx x tx.
struct ChannelSet {
  int users = 0;
  int tx_antennas = 0;
  int rx_antennas = 0;
  int subcarriers = 0;
  std::uint64_t seed = 0;
  double pathloss_spread_db = 0.0;
  double cross_attenuation_db = 0.0;
  std::vector<std::vector<std::vector<CMatrix>>> h;

  const CMatrix& link(int from, int to, int s) const { return h[from][to][s]; }
};

/// i.i.d. CN(0, g) entries with a per-link average gain g = 10^(-(spread u + cross)/10),
/// u uniform in [0,1] and cross applied to interfering links only. `epoch` selects a
/// block-fading redraw; epoch 0 is the base draw.
ChannelSet synth_channels(int users, int tx_antennas, int rx_antennas, int subcarriers,
                          double pathloss_spread_db, std::uint64_t seed,
                          double cross_attenuation_db = 0.0, std::uint64_t epoch = 0);

nlohmann::json channels_to_json(const ChannelSet& ch);
ChannelSet channels_from_json(const nlohmann::json& j);
nlohmann::json dataset_to_json(const MetricDataset& data);
MetricDataset dataset_from_json(const nlohmann::json& j);

struct PowerParams {
  double p_max = 2.0;
  double p_circuit = 0.1;
};

/// X = (Pc + Pmax)/Pmax * Q / (Pc + tr Q); requires Q >= 0, tr Q <= Pmax.
HermitianMatrix transform_q_to_x(const HermitianMatrix& q, const PowerParams& power);
/// Q = Pc Pmax X / (Pc + (1 - tr X) Pmax); requires X >= 0, tr X <= 1.
HermitianMatrix transform_x_to_q(const HermitianMatrix& x, const PowerParams& power);

class EeGame final : public GameModel {
 public:
  EeGame(ChannelSet channels, PowerParams power);

  std::string name() const override { return "ee"; }
  const std::vector<PlayerSpec>& players() const override { return players_; }
  double utility(int i, const ActionProfile& x) const override;
  HermitianMatrix payoff_gradient(int i, const ActionProfile& x) const override;

  /// Rate over total consumed power, evaluated directly on covariance matrices.
  double energy_efficiency(int i, const std::vector<HermitianMatrix>& q) const;
  std::vector<HermitianMatrix> to_covariances(const ActionProfile& x) const;
  /// Half the power budget spread evenly over antennas and subcarriers, as X.
  ActionProfile uniform_baseline() const;
  /// Effective channel W_-i^{-1/2} H_ii on subcarrier s.
  CMatrix effective_channel(int i, int s, const std::vector<HermitianMatrix>& q) const;

  const ChannelSet& channels() const { return channels_; }
  const PowerParams& power() const { return power_; }

 private:
  ChannelSet channels_;
  PowerParams power_;
  std::vector<PlayerSpec> players_;
};

}  // namespace mxl
