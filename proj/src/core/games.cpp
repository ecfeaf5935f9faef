#include "mxl/games.hpp"

#include "mxl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mxl {

namespace {

std::vector<PlayerSpec> scalar_players(int n) {
  std::vector<PlayerSpec> p;
  for (int i = 0; i < n; ++i) p.push_back({i + 1, Spectrahedron(1, 1.0)});
  return p;
}

double logdet_pd(const CMatrix& a) {
  Eigen::LLT<CMatrix> llt(a);
  if (llt.info() != Eigen::Success) throw NumericError("log-det of a non positive-definite matrix");
  double s = 0.0;
  for (int j = 0; j < a.rows(); ++j) s += std::log(llt.matrixL()(j, j).real());
  return 2.0 * s;
}

CMatrix inverse_sqrt_pd(const CMatrix& w) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(w);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0.0) {
    throw NumericError("interference covariance is not positive definite");
  }
  const RVector f = es.eigenvalues().array().rsqrt();
  return es.eigenvectors() * f.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

// ---------------------------------------------------------------------------
// MAC

double MacUtility::value(double x) const {
  return kind == Kind::kQuadratic ? b * x - 0.5 * c * x * x : a * std::log1p(x);
}

double MacUtility::derivative(double x) const {
  return kind == Kind::kQuadratic ? b - c * x : a / (1.0 + x);
}

MacGame::MacGame(int num_players, MacUtility utility)
    : players_(scalar_players(num_players)), utility_(utility) {
  if (num_players < 1) throw ConfigError("MacGame: need at least one player");
  if (utility_.kind == MacUtility::Kind::kQuadratic && !(utility_.c > 0.0)) {
    throw ConfigError("MacGame: quadratic utility needs c > 0");
  }
  if (utility_.kind == MacUtility::Kind::kLog && !(utility_.a > 0.0)) {
    throw ConfigError("MacGame: log utility needs a > 0");
  }
}

std::vector<double> MacGame::to_scalars(const ActionProfile& x) {
  std::vector<double> s;
  for (const auto& xi : x) s.push_back(xi(0, 0).real());
  return s;
}

ActionProfile MacGame::from_scalars(const std::vector<double>& x) {
  ActionProfile p;
  for (double v : x) p.push_back(HermitianMatrix::scalar(v));
  return p;
}

double MacGame::contention(int i, const std::vector<double>& x) const {
  double idle = 1.0;
  for (std::size_t j = 0; j < x.size(); ++j)
    if (static_cast<int>(j) != i) idle *= 1.0 - x[j];
  return 1.0 - idle;
}

double MacGame::scalar_utility(int i, const std::vector<double>& x) const {
  return utility_.value(x[i]) - x[i] * contention(i, x);
}

double MacGame::scalar_gradient(int i, const std::vector<double>& x) const {
  return utility_.derivative(x[i]) - contention(i, x);
}

double MacGame::utility(int i, const ActionProfile& x) const {
  return scalar_utility(i, to_scalars(x));
}

HermitianMatrix MacGame::payoff_gradient(int i, const ActionProfile& x) const {
  return HermitianMatrix::scalar(scalar_gradient(i, to_scalars(x)));
}

std::optional<double> MacGame::symmetric_equilibrium() const {
  const int n = num_players();
  auto foc = [&](double x) {
    return utility_.derivative(x) - (1.0 - std::pow(1.0 - x, n - 1));
  };
  double lo = 0.0, hi = 1.0;
  if (foc(lo) <= 0.0 || foc(hi) >= 0.0) return std::nullopt;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (foc(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Analytic games

LinearGame::LinearGame(HermitianMatrix c, double trace_bound)
    : c_(std::move(c)), players_{{1, Spectrahedron(c_.dim(), trace_bound)}} {}

double LinearGame::utility(int, const ActionProfile& x) const { return trace_inner(c_, x[0]); }

ActionProfile LinearGame::maximizer() const {
  const EigenPairs ep = c_.eigen();
  const int n = c_.dim();
  if (ep.values(n - 1) <= 0.0) return {HermitianMatrix::zero(n)};
  if (n > 1 && ep.values(n - 1) - ep.values(n - 2) < 1e-12) {
    throw DomainError("LinearGame::maximizer: top eigenvalue is not simple");
  }
  const auto v = ep.vectors.col(n - 1);
  return {hermitize(v * v.adjoint() * domain(0).trace_bound())};
}

ZeroGame::ZeroGame(std::vector<Spectrahedron> domains) {
  for (std::size_t i = 0; i < domains.size(); ++i)
    players_.push_back({static_cast<int>(i) + 1, domains[i]});
  validate_players(players_);
}

TwoEquilibriumGame::TwoEquilibriumGame(double base, double curvature)
    : base_(base), curvature_(curvature), players_(scalar_players(2)) {
  if (!(curvature_ > 0.0) || !(base_ > 0.0) || 4.0 * base_ * curvature_ >= 1.0) {
    throw ConfigError("TwoEquilibriumGame: need base, curvature > 0 and 4 base curvature < 1");
  }
}

double TwoEquilibriumGame::utility(int i, const ActionProfile& x) const {
  const double d = x[i](0, 0).real() - response(x[1 - i](0, 0).real());
  return -0.5 * d * d;
}

HermitianMatrix TwoEquilibriumGame::payoff_gradient(int i, const ActionProfile& x) const {
  return HermitianMatrix::scalar(response(x[1 - i](0, 0).real()) - x[i](0, 0).real());
}

double TwoEquilibriumGame::stable_point() const {
  return (1.0 - std::sqrt(1.0 - 4.0 * base_ * curvature_)) / (2.0 * curvature_);
}

// ---------------------------------------------------------------------------
// Metric learning

MetricDataset synth_clusters(int dim, int clusters, int points_per_cluster, double separation,
                             std::uint64_t seed) {
  if (dim < 1 || clusters < 2 || points_per_cluster < 2) {
    throw ConfigError("synth_clusters: need dim >= 1, clusters >= 2, points_per_cluster >= 2");
  }
  Rng rng = make_rng(seed, 0);
  MetricDataset d;
  d.dim = dim;
  d.seed = seed;
  for (int k = 0; k < clusters; ++k) {
    RVector mean = RVector::Zero(dim);
    mean(k % dim) = separation * (1 + k / dim);
    for (int p = 0; p < points_per_cluster; ++p) {
      RVector pt(dim);
      for (int j = 0; j < dim; ++j) {
        // Discriminative coordinates are tight, the rest are noisy.
        const double spread = j < std::min(clusters, dim) ? 0.3 : 1.0;
        pt(j) = mean(j) + spread * standard_normal(rng);
      }
      d.points.push_back(pt);
      d.labels.push_back(k);
    }
  }
  return d;
}

std::vector<Triple> build_triples(const MetricDataset& data) {
  std::vector<Triple> t;
  const int n = static_cast<int>(data.points.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (j == i || data.labels[j] != data.labels[i]) continue;
      for (int k = 0; k < n; ++k)
        if (data.labels[k] != data.labels[i]) t.push_back({i, j, k});
    }
  return t;
}

double smooth_hinge(double t, double width) {
  if (t <= 0.0) return 0.0;
  if (t <= width) return t * t / (2.0 * width);
  return t - 0.5 * width;
}

double smooth_hinge_derivative(double t, double width) {
  if (t <= 0.0) return 0.0;
  if (t <= width) return t / width;
  return 1.0;
}

MetricLearningGame::MetricLearningGame(MetricDataset data, MetricParams params)
    : data_(std::move(data)),
      params_(params),
      triples_(build_triples(data_)),
      players_{{1, Spectrahedron(data_.dim, params.trace_cap)}} {
  if (triples_.empty()) throw ConfigError("metric learning: dataset yields no triples");
  if (data_.points.size() != data_.labels.size()) {
    throw ConfigError("metric learning: points and labels differ in length");
  }
  if (!(params_.margin > 0.0) || !(params_.hinge_width > 0.0) || params_.minibatch < 1) {
    throw ConfigError("metric learning: margin, hinge width and minibatch must be positive");
  }
}

namespace {

struct TripleTerm {
  double arg;
  RVector a;  // anchor - similar
  RVector b;  // anchor - dissimilar
};

TripleTerm triple_term(const MetricDataset& d, const Triple& t, const Eigen::MatrixXd& xr,
                       double margin) {
  TripleTerm r{0.0, d.points[t.anchor] - d.points[t.similar],
               d.points[t.anchor] - d.points[t.dissimilar]};
  r.arg = r.a.dot(xr * r.a) - r.b.dot(xr * r.b) - margin;
  return r;
}

}  // namespace

double MetricLearningGame::minibatch_objective(const HermitianMatrix& x,
                                               std::span<const int> batch) const {
  if (batch.empty()) throw ConfigError("metric learning: empty triple set");
  const Eigen::MatrixXd xr = x.matrix().real();
  double loss = 0.0;
  for (int idx : batch) {
    loss += smooth_hinge(triple_term(data_, triples_[idx], xr, params_.margin).arg,
                         params_.hinge_width);
  }
  const CMatrix dev = x.matrix() - CMatrix::Identity(x.dim(), x.dim());
  return loss / static_cast<double>(batch.size()) + dev.squaredNorm();
}

HermitianMatrix MetricLearningGame::minibatch_gradient(const HermitianMatrix& x,
                                                       std::span<const int> batch) const {
  if (batch.empty()) throw ConfigError("metric learning: empty triple set");
  const Eigen::MatrixXd xr = x.matrix().real();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(x.dim(), x.dim());
  for (int idx : batch) {
    const TripleTerm t = triple_term(data_, triples_[idx], xr, params_.margin);
    const double w = smooth_hinge_derivative(t.arg, params_.hinge_width);
    if (w == 0.0) continue;
    g += w * (t.a * t.a.transpose() - t.b * t.b.transpose());
  }
  g /= static_cast<double>(batch.size());
  CMatrix full = g.cast<Complex>();
  full += 2.0 * (x.matrix() - CMatrix::Identity(x.dim(), x.dim()));
  return hermitize(full);
}

double MetricLearningGame::objective(const HermitianMatrix& x) const {
  std::vector<int> all(triples_.size());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = static_cast<int>(k);
  return minibatch_objective(x, all);
}

HermitianMatrix MetricLearningGame::objective_gradient(const HermitianMatrix& x) const {
  std::vector<int> all(triples_.size());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = static_cast<int>(k);
  return minibatch_gradient(x, all);
}

std::vector<int> MetricLearningGame::draw_minibatch(Rng& rng) const {
  std::uniform_int_distribution<int> pick(0, static_cast<int>(triples_.size()) - 1);
  std::vector<int> batch(params_.minibatch);
  for (auto& b : batch) b = pick(rng);
  return batch;
}

HermitianMatrix MetricLearningGame::stochastic_gradient(int, const ActionProfile& x,
                                                        Rng& rng) const {
  return minibatch_gradient(x[0], draw_minibatch(rng)) * -1.0;
}

// ---------------------------------------------------------------------------
// Channels and fixtures

ChannelSet synth_channels(int users, int tx_antennas, int rx_antennas, int subcarriers,
                          double pathloss_spread_db, std::uint64_t seed,
                          double cross_attenuation_db, std::uint64_t epoch) {
  if (users < 1 || tx_antennas < 1 || rx_antennas < 1 || subcarriers < 1) {
    throw ConfigError("synth_channels: dimensions must be >= 1");
  }
  if (pathloss_spread_db < 0.0 || cross_attenuation_db < 0.0) {
    throw ConfigError("synth_channels: spreads must be nonnegative");
  }
  ChannelSet ch;
  ch.users = users;
  ch.tx_antennas = tx_antennas;
  ch.rx_antennas = rx_antennas;
  ch.subcarriers = subcarriers;
  ch.seed = seed;
  ch.pathloss_spread_db = pathloss_spread_db;
  ch.cross_attenuation_db = cross_attenuation_db;
  // Link gains stay fixed across fading epochs; small-scale fading is redrawn.
  Rng gain_rng = make_rng(seed, 0);
  Rng fade_rng = make_rng(seed, 1 + epoch);
  ch.h.assign(users, std::vector<std::vector<CMatrix>>(users));
  for (int from = 0; from < users; ++from)
    for (int to = 0; to < users; ++to) {
      double db = pathloss_spread_db * uniform01(gain_rng);
      if (from != to) db += cross_attenuation_db;
      const double gain = std::pow(10.0, -db / 10.0);
      for (int s = 0; s < subcarriers; ++s) {
        CMatrix m(rx_antennas, tx_antennas);
        const double sd = std::sqrt(gain / 2.0);
        for (int r = 0; r < rx_antennas; ++r)
          for (int c = 0; c < tx_antennas; ++c)
            m(r, c) = Complex(sd * standard_normal(fade_rng), sd * standard_normal(fade_rng));
        ch.h[from][to].push_back(std::move(m));
      }
    }
  return ch;
}

namespace {

nlohmann::json matrix_to_json(const CMatrix& m) {
  nlohmann::json entries = nlohmann::json::array();
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) entries.push_back({m(r, c).real(), m(r, c).imag()});
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"entries", entries}};
}

CMatrix matrix_from_json(const nlohmann::json& j) {
  const int rows = j.at("rows").get<int>();
  const int cols = j.at("cols").get<int>();
  const auto& e = j.at("entries");
  if (static_cast<int>(e.size()) != rows * cols) throw ConfigError("fixture: entry count mismatch");
  CMatrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const auto& z = e.at(r * cols + c);
      m(r, c) = Complex(z.at(0).get<double>(), z.at(1).get<double>());
    }
  return m;
}

void check_format(const nlohmann::json& j, const char* format) {
  if (j.value("format", std::string()) != format || j.value("version", 0) != 1) {
    throw ConfigError(std::string("fixture: expected format '") + format + "' version 1");
  }
}

}  // namespace

nlohmann::json channels_to_json(const ChannelSet& ch) {
  nlohmann::json links = nlohmann::json::array();
  for (int from = 0; from < ch.users; ++from)
    for (int to = 0; to < ch.users; ++to) {
      nlohmann::json subs = nlohmann::json::array();
      for (const auto& m : ch.h[from][to]) subs.push_back(matrix_to_json(m));
      links.push_back({{"from", from + 1}, {"to", to + 1}, {"subcarriers", subs}});
    }
  return {{"format", "mxl.channels"},
          {"version", 1},
          {"users", ch.users},
          {"tx_antennas", ch.tx_antennas},
          {"rx_antennas", ch.rx_antennas},
          {"subcarriers", ch.subcarriers},
          {"seed", ch.seed},
          {"pathloss_spread_db", ch.pathloss_spread_db},
          {"cross_attenuation_db", ch.cross_attenuation_db},
          {"links", links}};
}

ChannelSet channels_from_json(const nlohmann::json& j) {
  check_format(j, "mxl.channels");
  ChannelSet ch;
  ch.users = j.at("users").get<int>();
  ch.tx_antennas = j.at("tx_antennas").get<int>();
  ch.rx_antennas = j.at("rx_antennas").get<int>();
  ch.subcarriers = j.at("subcarriers").get<int>();
  ch.seed = j.value("seed", std::uint64_t{0});
  ch.pathloss_spread_db = j.value("pathloss_spread_db", 0.0);
  ch.cross_attenuation_db = j.value("cross_attenuation_db", 0.0);
  ch.h.assign(ch.users, std::vector<std::vector<CMatrix>>(ch.users));
  for (const auto& link : j.at("links")) {
    const int from = link.at("from").get<int>() - 1;
    const int to = link.at("to").get<int>() - 1;
    if (from < 0 || to < 0 || from >= ch.users || to >= ch.users) {
      throw ConfigError("fixture: link index out of range");
    }
    for (const auto& m : link.at("subcarriers")) {
      CMatrix h = matrix_from_json(m);
      if (h.rows() != ch.rx_antennas || h.cols() != ch.tx_antennas) {
        throw ConfigError("fixture: channel matrix has wrong shape");
      }
      ch.h[from][to].push_back(std::move(h));
    }
  }
  for (const auto& row : ch.h)
    for (const auto& subs : row)
      if (static_cast<int>(subs.size()) != ch.subcarriers) {
        throw ConfigError("fixture: missing links or subcarriers");
      }
  return ch;
}

nlohmann::json dataset_to_json(const MetricDataset& data) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : data.points) pts.push_back(std::vector<double>(p.data(), p.data() + p.size()));
  return {{"format", "mxl.dataset"}, {"version", 1},       {"dim", data.dim},
          {"seed", data.seed},       {"points", pts},       {"labels", data.labels}};
}

MetricDataset dataset_from_json(const nlohmann::json& j) {
  check_format(j, "mxl.dataset");
  MetricDataset d;
  d.dim = j.at("dim").get<int>();
  d.seed = j.value("seed", std::uint64_t{0});
  for (const auto& p : j.at("points")) {
    const auto v = p.get<std::vector<double>>();
    if (static_cast<int>(v.size()) != d.dim) throw ConfigError("fixture: point has wrong dimension");
    d.points.push_back(Eigen::Map<const RVector>(v.data(), d.dim));
  }
  d.labels = j.at("labels").get<std::vector<int>>();
  if (d.labels.size() != d.points.size()) throw ConfigError("fixture: label count mismatch");
  return d;
}

// ---------------------------------------------------------------------------
// Energy efficiency

namespace {

HermitianMatrix q_to_x_unchecked(const HermitianMatrix& q, const PowerParams& p) {
  const double k = (p.p_circuit + p.p_max) / p.p_max;
  return q * (k / (p.p_circuit + q.trace()));
}

HermitianMatrix x_to_q_unchecked(const HermitianMatrix& x, const PowerParams& p) {
  return x * (p.p_circuit * p.p_max / (p.p_circuit + (1.0 - x.trace()) * p.p_max));
}

void check_psd_with_trace(const HermitianMatrix& m, double bound, const char* what) {
  if (!m.all_finite()) throw DomainError(std::string(what) + ": non-finite entries");
  const RVector ev = m.eigenvalues();
  if (ev.minCoeff() < -Spectrahedron::kPsdTol * std::max(1.0, bound) ||
      m.trace() > bound * (1.0 + 1e-12) + Spectrahedron::kTraceTol) {
    throw DomainError(std::string(what) + ": input outside its domain");
  }
}

}  // namespace

HermitianMatrix transform_q_to_x(const HermitianMatrix& q, const PowerParams& power) {
  check_psd_with_trace(q, power.p_max, "transform_q_to_x");
  return q_to_x_unchecked(q, power);
}

HermitianMatrix transform_x_to_q(const HermitianMatrix& x, const PowerParams& power) {
  check_psd_with_trace(x, 1.0, "transform_x_to_q");
  return x_to_q_unchecked(x, power);
}

EeGame::EeGame(ChannelSet channels, PowerParams power)
    : channels_(std::move(channels)), power_(power) {
  if (!(power_.p_max > 0.0) || !(power_.p_circuit > 0.0)) {
    throw ConfigError("EeGame: Pmax and Pc must be positive");
  }
  if (static_cast<int>(channels_.h.size()) != channels_.users) {
    throw ConfigError("EeGame: channel set is incomplete");
  }
  const std::vector<int> blocks(channels_.subcarriers, channels_.tx_antennas);
  for (int i = 0; i < channels_.users; ++i) {
    players_.push_back({i + 1, Spectrahedron(channels_.tx_antennas * channels_.subcarriers, 1.0,
                                             channels_.subcarriers > 1 ? blocks : std::vector<int>{})});
  }
}

std::vector<HermitianMatrix> EeGame::to_covariances(const ActionProfile& x) const {
  std::vector<HermitianMatrix> q;
  for (const auto& xi : x) q.push_back(x_to_q_unchecked(xi, power_));
  return q;
}

CMatrix EeGame::effective_channel(int i, int s, const std::vector<HermitianMatrix>& q) const {
  const int m = channels_.tx_antennas;
  const int nr = channels_.rx_antennas;
  CMatrix w = CMatrix::Identity(nr, nr);
  for (int j = 0; j < channels_.users; ++j) {
    if (j == i) continue;
    const CMatrix& h = channels_.link(j, i, s);
    w += h * q[j].matrix().block(s * m, s * m, m, m) * h.adjoint();
  }
  return inverse_sqrt_pd(w) * channels_.link(i, i, s);
}

double EeGame::energy_efficiency(int i, const std::vector<HermitianMatrix>& q) const {
  const int m = channels_.tx_antennas;
  const int nr = channels_.rx_antennas;
  double rate = 0.0;
  for (int s = 0; s < channels_.subcarriers; ++s) {
    CMatrix w = CMatrix::Identity(nr, nr);
    for (int j = 0; j < channels_.users; ++j) {
      if (j == i) continue;
      const CMatrix& h = channels_.link(j, i, s);
      w += h * q[j].matrix().block(s * m, s * m, m, m) * h.adjoint();
    }
    const CMatrix& hii = channels_.link(i, i, s);
    const CMatrix signal = hii * q[i].matrix().block(s * m, s * m, m, m) * hii.adjoint();
    rate += logdet_pd(w + signal) - logdet_pd(w);
  }
  return rate / (power_.p_circuit + q[i].trace());
}

double EeGame::utility(int i, const ActionProfile& x) const {
  const auto q = to_covariances(x);
  const int m = channels_.tx_antennas;
  const double pc = power_.p_circuit, pm = power_.p_max;
  const double headroom = pc + (1.0 - x[i].trace()) * pm;
  const double beta = pc * pm / headroom;
  double logdet = 0.0;
  for (int s = 0; s < channels_.subcarriers; ++s) {
    const CMatrix g = effective_channel(i, s, q);
    const CMatrix a = CMatrix::Identity(g.rows(), g.rows()) +
                      beta * g * x[i].matrix().block(s * m, s * m, m, m) * g.adjoint();
    logdet += logdet_pd(a);
  }
  return headroom / (pc * (pc + pm)) * logdet;
}

HermitianMatrix EeGame::payoff_gradient(int i, const ActionProfile& x) const {
  const auto q = to_covariances(x);
  const int m = channels_.tx_antennas;
  const double pc = power_.p_circuit, pm = power_.p_max;
  const double norm = pc * (pc + pm);
  const double headroom = pc + (1.0 - x[i].trace()) * pm;
  const double beta = pc * pm / headroom;
  const double scale = headroom / norm;

  CMatrix grad = CMatrix::Zero(x[i].dim(), x[i].dim());
  double logdet = 0.0;
  double signal_trace = 0.0;  // sum_s tr(A_s^{-1} G_s X_s G_s^dagger)
  for (int s = 0; s < channels_.subcarriers; ++s) {
    const CMatrix g = effective_channel(i, s, q);
    const CMatrix gxg = g * x[i].matrix().block(s * m, s * m, m, m) * g.adjoint();
    const CMatrix a = CMatrix::Identity(g.rows(), g.rows()) + beta * gxg;
    logdet += logdet_pd(a);
    const Eigen::LLT<CMatrix> llt(a);
    signal_trace += llt.solve(gxg).trace().real();
    grad.block(s * m, s * m, m, m) = scale * beta * g.adjoint() * llt.solve(g);
  }
  // Both the prefactor and beta depend on tr X_i.
  const double diag = scale * beta * pm / headroom * signal_trace - pm / norm * logdet;
  grad += diag * CMatrix::Identity(x[i].dim(), x[i].dim());
  return hermitize(grad);
}

ActionProfile EeGame::uniform_baseline() const {
  const int dim = channels_.tx_antennas * channels_.subcarriers;
  const double per_dim = 0.5 * power_.p_max / dim;
  ActionProfile x;
  for (int i = 0; i < channels_.users; ++i) {
    x.push_back(transform_q_to_x(HermitianMatrix::identity(dim) * per_dim, power_));
  }
  return x;
}

}  // namespace mxl
