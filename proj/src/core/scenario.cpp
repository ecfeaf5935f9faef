#include "mxl/scenario.hpp"

#include "mxl/errors.hpp"
#include "mxl/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace mxl {

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Schema helpers

std::string where(const std::string& origin, const YAML::Mark& m) {
  if (m.is_null()) return origin + ": ";
  return origin + ":" + std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1) + ": ";
}

[[noreturn]] void fail_at(const std::string& origin, const YAML::Node& at, const std::string& msg) {
  throw ConfigError(where(origin, at.IsDefined() ? at.Mark() : YAML::Mark::null_mark()) + msg);
}

// A mapping whose keys are consumed as they are read; finish() rejects leftovers.
class Section {
 public:
  Section(YAML::Node node, std::string path, const std::string& origin)
      : node_(std::move(node)), path_(std::move(path)), origin_(origin) {
    if (node_.IsDefined() && !node_.IsNull() && !node_.IsMap()) {
      fail_at(origin_, node_, "section '" + path_ + "' must be a mapping");
    }
  }

  bool has(const std::string& key) const { return present() && node_[key].IsDefined(); }

  YAML::Node raw(const std::string& key) {
    used_.insert(key);
    return present() ? node_[key] : YAML::Node(YAML::NodeType::Undefined);
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    const YAML::Node v = raw(key);
    if (!v.IsDefined() || v.IsNull()) return fallback;
    return convert<T>(v, key);
  }

  template <typename T>
  T require(const std::string& key) {
    const YAML::Node v = raw(key);
    if (!v.IsDefined() || v.IsNull()) fail("missing required key '" + name(key) + "'");
    return convert<T>(v, key);
  }

  std::string choice(const std::string& key, const std::string& fallback,
                     std::initializer_list<const char*> allowed) {
    const std::string v = get<std::string>(key, fallback);
    for (const char* a : allowed)
      if (v == a) return v;
    std::string list;
    for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
    fail_value(key, "'" + name(key) + "' must be one of: " + list + " (got '" + v + "')");
  }

  Section child(const std::string& key) {
    return Section(raw(key), name(key), origin_);
  }

  void finish() const {
    if (!present()) return;
    for (const auto& kv : node_) {
      const std::string k = kv.first.as<std::string>();
      if (!used_.count(k)) fail_at(origin_, kv.first, "unknown key '" + k + "' in section '" + path_ + "'");
    }
  }

  [[noreturn]] void fail(const std::string& msg) const { fail_at(origin_, node_, msg); }
  [[noreturn]] void fail_value(const std::string& key, const std::string& msg) const {
    fail_at(origin_, has(key) ? node_[key] : node_, msg);
  }

  std::string name(const std::string& key) const { return path_ + "." + key; }
  const std::string& origin() const { return origin_; }
  bool present() const { return node_.IsDefined() && node_.IsMap(); }

 private:
  template <typename T>
  T convert(const YAML::Node& v, const std::string& key) const {
    try {
      if constexpr (std::is_same_v<T, std::vector<double>> || std::is_same_v<T, std::vector<long>> ||
                    std::is_same_v<T, std::vector<std::string>>) {
        if (!v.IsSequence()) throw YAML::Exception(v.Mark(), "");
      } else {
        if (!v.IsScalar()) throw YAML::Exception(v.Mark(), "");
      }
      return v.as<T>();
    } catch (const YAML::Exception&) {
      fail_at(origin_, v, "invalid value for '" + name(key) + "': expected " + type_name<T>());
    }
  }

  template <typename T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, bool>) return "true or false";
    else if constexpr (std::is_integral_v<T>) return "an integer";
    else if constexpr (std::is_floating_point_v<T>) return "a number";
    else if constexpr (std::is_same_v<T, std::string>) return "a string";
    else return "a list";
  }

  YAML::Node node_;
  std::string path_;
  const std::string& origin_;
  std::set<std::string> used_;
};

template <typename T>
T positive(Section& s, const std::string& key, T fallback) {
  const T v = s.get<T>(key, fallback);
  if (!(v > 0) || !std::isfinite(static_cast<double>(v))) s.fail_value(key, "'" + s.name(key) + "' must be > 0");
  return v;
}

template <typename T>
T nonnegative(Section& s, const std::string& key, T fallback) {
  const T v = s.get<T>(key, fallback);
  if (!(v >= 0) || !std::isfinite(static_cast<double>(v))) s.fail_value(key, "'" + s.name(key) + "' must be >= 0");
  return v;
}

// ---------------------------------------------------------------------------
// Sections

GameSpec parse_game(Section g, const fs::path& base_dir) {
  GameSpec s;
  s.kind = g.choice("kind", "", {"mac", "ee", "metric", "linear", "two_equilibrium"});
  if (s.kind == "mac") {
    s.players = positive(g, "players", s.players);
    s.utility = g.choice("utility", "quadratic", {"quadratic", "log"});
    if (s.utility == "quadratic") {
      s.b = g.get("b", s.b);
      s.c = positive(g, "c", s.c);
    } else {
      s.a = positive(g, "a", s.a);
    }
  } else if (s.kind == "ee") {
    s.users = positive(g, "users", s.users);
    s.tx_antennas = positive(g, "tx_antennas", s.tx_antennas);
    s.rx_antennas = positive(g, "rx_antennas", s.rx_antennas);
    s.subcarriers = positive(g, "subcarriers", s.subcarriers);
    s.pathloss_spread_db = nonnegative(g, "pathloss_spread_db", s.pathloss_spread_db);
    s.cross_attenuation_db = nonnegative(g, "cross_attenuation_db", s.cross_attenuation_db);
    s.power.p_max = positive(g, "p_max", s.power.p_max);
    s.power.p_circuit = positive(g, "p_circuit", s.power.p_circuit);
    s.seed = g.get<std::uint64_t>("seed", s.seed);
    s.fixture = g.get<std::string>("fixture", "");
  } else if (s.kind == "metric") {
    s.dim = positive(g, "dim", s.dim);
    s.clusters = positive(g, "clusters", s.clusters);
    s.points_per_cluster = positive(g, "points_per_cluster", s.points_per_cluster);
    s.separation = positive(g, "separation", s.separation);
    s.metric.margin = positive(g, "margin", s.metric.margin);
    s.metric.trace_cap = positive(g, "trace_cap", s.metric.trace_cap);
    s.metric.hinge_width = positive(g, "hinge_width", s.metric.hinge_width);
    s.metric.minibatch = positive(g, "minibatch", s.metric.minibatch);
    s.seed = g.get<std::uint64_t>("seed", s.seed);
    s.fixture = g.get<std::string>("fixture", "");
  } else if (s.kind == "linear") {
    s.cost = g.get("cost", s.cost);
    if (s.cost.empty()) g.fail_value("cost", "'game.cost' must list at least one eigenvalue");
    s.trace_bound = positive(g, "trace_bound", s.trace_bound);
  } else {
    s.base = positive(g, "base", s.base);
    s.curvature = positive(g, "curvature", s.curvature);
  }
  if (!s.fixture.empty()) {
    fs::path p(s.fixture);
    if (p.is_relative()) p = base_dir / p;
    if (!fs::exists(p)) g.fail_value("fixture", "fixture file not found: " + p.string());
    s.fixture = p.string();
  }
  g.finish();
  return s;
}

ScheduleSpec parse_schedule(Section s) {
  ScheduleSpec out;
  const std::string kind = s.choice("kind", "power_law", {"power_law", "optimized", "constant"});
  if (kind == "power_law") {
    out.schedule = StepSchedule::power_law(positive(s, "gamma0", 1.0), s.get("exponent", 0.5));
    const double a = out.schedule.exponent;
    if (!(a > 0.0 && a <= 1.0)) s.fail_value("exponent", "'" + s.name("exponent") + "' must lie in (0, 1]");
  } else if (kind == "optimized") {
    const YAML::Node v = s.raw("strength");
    if (v.IsDefined() && v.IsScalar() && v.Scalar() == "auto") {
      out.auto_strength = true;
      out.schedule = StepSchedule::optimized(1.0);
    } else {
      out.schedule = StepSchedule::optimized(positive(s, "strength", 1.0));
    }
  } else {
    out.schedule = StepSchedule::constant(positive(s, "gamma0", 1.0));
  }
  s.finish();
  return out;
}

NoiseSpec parse_noise(Section s) {
  NoiseSpec out;
  const std::string kind = s.choice("kind", "none", {"none", "gaussian", "relative", "pareto"});
  if (kind == "gaussian") {
    if (s.has("sigma") == s.has("level")) s.fail("gaussian noise needs exactly one of 'sigma' or 'level'");
    if (s.has("level")) {
      out.model = NoiseModel::gaussian(0.0);
      out.model.level = nonnegative(s, "level", 0.0);
      out.calibrated = true;
    } else {
      out.model = NoiseModel::gaussian(nonnegative(s, "sigma", 0.0));
    }
  } else if (kind == "relative") {
    out.model = NoiseModel::relative(nonnegative(s, "level", 0.0));
  } else if (kind == "pareto") {
    out.model = NoiseModel::pareto_tail(s.get("tail_index", 1.5), nonnegative(s, "scale", 1.0));
    if (!(out.model.tail_index > 1.0)) {
      s.fail_value("tail_index", "'" + s.name("tail_index") + "' must be > 1");
    }
  }
  if (kind != "none") out.model.hermitian = s.get("hermitian", true);
  s.finish();
  return out;
}

AsyncSchedule parse_async(Section s, int players) {
  AsyncSchedule a;
  const YAML::Node p = s.raw("update_prob");
  try {
    if (!p.IsDefined()) a.update_prob = {1.0};
    else if (p.IsSequence()) a.update_prob = p.as<std::vector<double>>();
    else a.update_prob = {p.as<double>()};
  } catch (const YAML::Exception&) {
    fail_at(s.origin(), p, "invalid value for 'async.update_prob': expected a number or a list");
  }
  a.max_delay = nonnegative(s, "max_delay", 0);
  a.mode = s.choice("mode", "bernoulli", {"bernoulli", "one_at_a_time"}) == "bernoulli"
               ? AsyncSchedule::Mode::kBernoulli
               : AsyncSchedule::Mode::kOneAtATime;
  try {
    a.validate(players);
  } catch (const ConfigError& e) {
    fail_at(s.origin(), p.IsDefined() ? p : YAML::Node(), e.what());
  }
  s.finish();
  return a;
}

ExperimentSpec parse_experiment(Section s) {
  ExperimentSpec e;
  e.mode = s.choice("mode", "run", {"run", "rate", "stability", "sweep"});
  auto optional_number = [&](const std::string& key) -> std::optional<double> {
    const YAML::Node v = s.raw(key);
    if (!v.IsDefined() || (v.IsScalar() && v.Scalar() == "auto")) return std::nullopt;
    try {
      return v.as<double>();
    } catch (const YAML::Exception&) {
      fail_at(s.origin(), v, "invalid value for '" + s.name(key) + "': expected a number or 'auto'");
    }
  };
  if (e.mode == "rate") {
    e.seeds = positive(s, "seeds", 100);
    e.checkpoints = s.get("checkpoints", e.checkpoints);
    e.metric = s.choice("metric", "nuclear_distance", {"nuclear_distance", "kl"}) == "kl"
                   ? RateMetric::kKl
                   : RateMetric::kNuclearDistance;
    e.expected_slope = optional_number("expected_slope");
    e.slope_tolerance = optional_number("slope_tolerance");
    if (e.slope_tolerance && !(*e.slope_tolerance > 0.0)) {
      s.fail_value("slope_tolerance", "'experiment.slope_tolerance' must be > 0");
    }
    e.bound_check = s.get("bound_check", false);
    e.strength_samples = positive(s, "strength_samples", e.strength_samples);
    const auto& cp = e.checkpoints;
    bool ok = cp.size() >= 4;
    for (std::size_t j = 0; ok && j < cp.size(); ++j) ok = cp[j] >= 1 && (j == 0 || cp[j] > cp[j - 1]);
    if (ok) ok = std::log10(static_cast<double>(cp.back()) / cp.front()) >= 2.0 - 1e-9;
    if (!ok) {
      s.fail_value("checkpoints",
                   "'experiment.checkpoints' needs >= 4 increasing iteration counts spanning two decades");
    }
  } else if (e.mode == "stability") {
    e.samples = positive(s, "samples", e.samples);
    e.radius = nonnegative(s, "radius", e.radius);
    e.checks = s.get("checks", e.checks);
    for (const auto& c : e.checks) {
      if (c != "monotonicity" && c != "variational_stability" && c != "hessian") {
        s.fail_value("checks", "unknown check '" + c +
                                   "' (allowed: monotonicity, variational_stability, hessian)");
      }
    }
    if (e.checks.empty()) s.fail_value("checks", "'experiment.checks' must not be empty");
    e.strength_samples = positive(s, "strength_samples", 2000);
  } else if (e.mode == "sweep") {
    e.seeds = positive(s, "seeds", e.seeds);
    Section sw = s.child("sweep");
    if (!sw.present()) s.fail("sweep mode needs an 'experiment.sweep' section");
    e.sweep_parameter = sw.require<std::string>("parameter");
    const YAML::Node values = sw.raw("values");
    if (!values.IsDefined() || !values.IsSequence() || values.size() == 0) {
      sw.fail("'experiment.sweep.values' must be a non-empty list");
    }
    for (const auto& v : values) {
      if (!v.IsScalar()) fail_at(s.origin(), v, "sweep values must be scalars");
      e.sweep_values.push_back(v);
    }
    const std::string& p = e.sweep_parameter;
    if (p.rfind("game.", 0) != 0 && p.rfind("solver.", 0) != 0 && p.rfind("async.", 0) != 0) {
      sw.fail_value("parameter", "sweep parameter must start with game., solver. or async.");
    }
    sw.finish();
  }
  s.finish();
  return e;
}

YAML::Node with_override(const YAML::Node& root, const std::string& path, const YAML::Node& value) {
  YAML::Node copy = YAML::Clone(root);
  YAML::Node cur = copy;
  std::stringstream ss(path);
  std::vector<std::string> parts;
  for (std::string part; std::getline(ss, part, '.');) parts.push_back(part);
  for (std::size_t k = 0; k + 1 < parts.size(); ++k) {
    YAML::Node next = cur[parts[k]];
    if (!next.IsDefined() || next.IsNull()) {
      cur[parts[k]] = YAML::Node(YAML::NodeType::Map);
      next = cur[parts[k]];
    }
    cur.reset(next);
  }
  cur[parts.back()] = YAML::Clone(value);
  return copy;
}

ScenarioConfig resolve(const YAML::Node& root, const std::string& origin, const fs::path& base_dir,
                       bool check_sweep) {
  if (!root.IsMap()) fail_at(origin, root, "scenario must be a mapping with a 'game' section");
  ScenarioConfig c;
  c.origin = origin;
  c.root = root;
  Section top(root, "scenario", c.origin);
  Section g = top.child("game");
  if (!g.present()) top.fail("missing required section 'game'");
  c.game = parse_game(std::move(g), base_dir);

  Section s = top.child("solver");
  c.schedule = parse_schedule(s.child("schedule"));
  c.noise = parse_noise(s.child("noise"));
  c.max_iters = positive(s, "max_iters", c.max_iters);
  c.stop_residual = nonnegative(s, "stop_residual", c.stop_residual);
  c.log_every = positive(s, "log_every", c.log_every);
  c.seed = s.get<std::uint64_t>("seed", c.seed);
  c.start = s.choice("start", "uniform", {"uniform", "baseline"});
  if (c.start == "baseline" && c.game.kind != "ee") {
    s.fail_value("start", "'solver.start: baseline' is only defined for ee games");
  }
  c.reference = s.choice("reference", "none", {"none", "oracle"});
  c.stochastic_oracle = s.get("stochastic_oracle", true);
  s.finish();

  // Construct the game now so parameter combinations are checked before any output.
  std::unique_ptr<GameModel> game;
  try {
    game = build_game(c.game);
  } catch (const std::exception& e) {
    fail_at(origin, root["game"], e.what());
  }

  if (top.has("async")) c.async = parse_async(top.child("async"), game->num_players());
  c.experiment = parse_experiment(top.child("experiment"));
  if (c.async && c.async->max_delay >= c.max_iters) {
    fail_at(origin, root["async"], "'async.max_delay' must be smaller than 'solver.max_iters'");
  }
  if (c.async && c.experiment.mode == "rate") {
    fail_at(origin, root["async"], "rate experiments use the synchronous solver; remove 'async'");
  }
  top.finish();

  if (check_sweep && c.experiment.mode == "sweep") {
    for (const auto& v : c.experiment.sweep_values) {
      resolve(with_override(root, c.experiment.sweep_parameter, v), origin, base_dir, false);
    }
  }
  return c;
}

}  // namespace

ScenarioConfig load_scenario_string(const std::string& text, const std::string& origin,
                                    const fs::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(where(origin, e.mark) + e.msg);
  }
  return resolve(root, origin, base_dir, true);
}

ScenarioConfig load_scenario_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot read scenario file");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_scenario_string(ss.str(), path.string(), path.parent_path());
}

void set_seed(ScenarioConfig& config, std::uint64_t seed) {
  config.seed = seed;
  config.root["solver"]["seed"] = seed;
}

std::unique_ptr<GameModel> build_game(const GameSpec& s) {
  if (s.kind == "mac") {
    return std::make_unique<MacGame>(s.players, s.utility == "quadratic" ? MacUtility::quadratic(s.b, s.c)
                                                                         : MacUtility::log_utility(s.a));
  }
  if (s.kind == "ee") {
    ChannelSet ch;
    if (!s.fixture.empty()) {
      std::ifstream in(s.fixture);
      if (!in) throw ConfigError("cannot read fixture " + s.fixture);
      try {
        ch = channels_from_json(nlohmann::json::parse(in));
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("fixture " + s.fixture + ": " + e.what());
      }
    } else {
      ch = synth_channels(s.users, s.tx_antennas, s.rx_antennas, s.subcarriers, s.pathloss_spread_db,
                          s.seed, s.cross_attenuation_db);
    }
    return std::make_unique<EeGame>(std::move(ch), s.power);
  }
  if (s.kind == "metric") {
    MetricDataset d;
    if (!s.fixture.empty()) {
      std::ifstream in(s.fixture);
      if (!in) throw ConfigError("cannot read fixture " + s.fixture);
      try {
        d = dataset_from_json(nlohmann::json::parse(in));
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("fixture " + s.fixture + ": " + e.what());
      }
    } else {
      d = synth_clusters(s.dim, s.clusters, s.points_per_cluster, s.separation, s.seed);
    }
    return std::make_unique<MetricLearningGame>(std::move(d), s.metric);
  }
  if (s.kind == "linear") {
    RVector diag(static_cast<int>(s.cost.size()));
    for (std::size_t k = 0; k < s.cost.size(); ++k) diag(static_cast<int>(k)) = s.cost[k];
    return std::make_unique<LinearGame>(HermitianMatrix::diagonal(diag), s.trace_bound);
  }
  if (s.kind == "two_equilibrium") return std::make_unique<TwoEquilibriumGame>(s.base, s.curvature);
  throw ConfigError("unknown game kind '" + s.kind + "'");
}

// ---------------------------------------------------------------------------
// JSON views

namespace {

using nlohmann::json;

json game_to_json(const GameSpec& s) {
  json j{{"kind", s.kind}};
  if (s.kind == "mac") {
    j["players"] = s.players;
    j["utility"] = s.utility;
    if (s.utility == "quadratic") {
      j["b"] = s.b;
      j["c"] = s.c;
    } else {
      j["a"] = s.a;
    }
  } else if (s.kind == "ee") {
    j.update({{"users", s.users}, {"tx_antennas", s.tx_antennas}, {"rx_antennas", s.rx_antennas},
              {"subcarriers", s.subcarriers}, {"pathloss_spread_db", s.pathloss_spread_db},
              {"cross_attenuation_db", s.cross_attenuation_db}, {"p_max", s.power.p_max},
              {"p_circuit", s.power.p_circuit}, {"seed", s.seed}, {"fixture", s.fixture}});
  } else if (s.kind == "metric") {
    j.update({{"dim", s.dim}, {"clusters", s.clusters}, {"points_per_cluster", s.points_per_cluster},
              {"separation", s.separation}, {"margin", s.metric.margin}, {"trace_cap", s.metric.trace_cap},
              {"hinge_width", s.metric.hinge_width}, {"minibatch", s.metric.minibatch}, {"seed", s.seed},
              {"fixture", s.fixture}});
  } else if (s.kind == "linear") {
    j["cost"] = s.cost;
    j["trace_bound"] = s.trace_bound;
  } else {
    j["base"] = s.base;
    j["curvature"] = s.curvature;
  }
  return j;
}

json schedule_to_json(const ScheduleSpec& s) {
  switch (s.schedule.kind) {
    case StepSchedule::Kind::kPowerLaw:
      return {{"kind", "power_law"}, {"gamma0", s.schedule.gamma0}, {"exponent", s.schedule.exponent}};
    case StepSchedule::Kind::kOptimized:
      return {{"kind", "optimized"}, {"strength", s.auto_strength ? json("auto") : json(s.schedule.strength)}};
    case StepSchedule::Kind::kConstant:
      return {{"kind", "constant"}, {"gamma0", s.schedule.gamma0}};
  }
  return {};
}

json noise_to_json(const NoiseSpec& s) {
  const NoiseModel& m = s.model;
  switch (m.kind) {
    case NoiseModel::Kind::kNone:
      return {{"kind", "none"}};
    case NoiseModel::Kind::kGaussian:
      if (s.calibrated) return {{"kind", "gaussian"}, {"level", m.level}, {"hermitian", m.hermitian}};
      return {{"kind", "gaussian"}, {"sigma", m.sigma}, {"hermitian", m.hermitian}};
    case NoiseModel::Kind::kRelative:
      return {{"kind", "relative"}, {"level", m.level}, {"hermitian", m.hermitian}};
    case NoiseModel::Kind::kParetoTail:
      return {{"kind", "pareto"}, {"tail_index", m.tail_index}, {"scale", m.scale}, {"hermitian", m.hermitian}};
  }
  return {};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json("auto"); }

json experiment_to_json(const ExperimentSpec& e) {
  json j{{"mode", e.mode}};
  if (e.mode == "rate") {
    j.update({{"seeds", e.seeds}, {"checkpoints", e.checkpoints}, {"metric", to_string(e.metric)},
              {"expected_slope", optional_json(e.expected_slope)},
              {"slope_tolerance", optional_json(e.slope_tolerance)}, {"bound_check", e.bound_check},
              {"strength_samples", e.strength_samples}});
  } else if (e.mode == "stability") {
    j.update({{"samples", e.samples}, {"radius", e.radius}, {"checks", e.checks},
              {"strength_samples", e.strength_samples}});
  } else if (e.mode == "sweep") {
    json values = json::array();
    for (const auto& v : e.sweep_values) values.push_back(v.Scalar());
    j.update({{"seeds", e.seeds}, {"sweep", {{"parameter", e.sweep_parameter}, {"values", values}}}});
  }
  return j;
}

json matrix_json(const HermitianMatrix& h) {
  json rows = json::array();
  for (int r = 0; r < h.dim(); ++r) {
    json row = json::array();
    for (int c = 0; c < h.dim(); ++c) row.push_back({h(r, c).real(), h(r, c).imag()});
    rows.push_back(row);
  }
  return rows;
}

json profile_json(const ActionProfile& x) {
  json out = json::array();
  for (const auto& xi : x) out.push_back(matrix_json(xi));
  return out;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json stability_json(const StabilityReport& r) {
  json j{{"samples", r.samples}, {"rng_seed", r.rng_seed}, {"passed", r.passed()}};
  if (r.has_monotonicity) {
    j["monotonicity"] = {{"violations", r.monotonicity_violations}, {"worst", finite_or_null(r.monotonicity_worst)}};
  }
  if (r.has_variational_stability) {
    j["variational_stability"] = {
        {"radius", r.vs_radius}, {"violations", r.vs_violations}, {"worst", finite_or_null(r.vs_worst)}};
  }
  if (r.has_hessian) {
    j["hessian"] = {{"samples", r.hessian_samples}, {"max_quadform", finite_or_null(r.hessian_max_quadform)}};
  }
  return j;
}

json strength_json(const StrongStabilityEstimate& e) {
  return {{"b_hat", e.b_hat},          {"samples", e.samples},
          {"used", e.used},            {"violation_count", e.violation_count},
          {"min_ratio", finite_or_null(e.min_ratio)}, {"seed", e.seed}};
}

json vector_json(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(finite_or_null(x));
  return out;
}

json rate_json(const RateFit& f) {
  json j{{"checkpoints", f.checkpoints},
         {"values", vector_json(f.values)},
         {"stderrs", vector_json(f.stderrs)},
         {"distance_mean", vector_json(f.distance_mean)},
         {"distance_stderr", vector_json(f.distance_stderr)},
         {"kl_mean", vector_json(f.kl_mean)},
         {"kl_stderr", vector_json(f.kl_stderr)},
         {"slope", finite_or_null(f.slope)},
         {"slope_stderr", finite_or_null(f.slope_stderr)},
         {"seeds", f.seeds},
         {"v_hat", f.v_hat},
         {"monotone", f.monotone},
         {"gamma_b_flag", f.gamma_b_flag}};
  j["b_hat"] = f.b_hat ? json(*f.b_hat) : json(nullptr);
  j["gamma_b"] = f.gamma_b ? json(*f.gamma_b) : json(nullptr);
  j["kl_bound"] = vector_json(f.kl_bound);
  j["bound_ok"] = f.bound_ok ? json(*f.bound_ok) : json(nullptr);
  return j;
}

}  // namespace

nlohmann::json config_to_json(const ScenarioConfig& c) {
  json solver{{"schedule", schedule_to_json(c.schedule)},
              {"noise", noise_to_json(c.noise)},
              {"max_iters", c.max_iters},
              {"stop_residual", c.stop_residual},
              {"log_every", c.log_every},
              {"seed", c.seed},
              {"start", c.start},
              {"reference", c.reference},
              {"stochastic_oracle", c.stochastic_oracle}};
  json j{{"game", game_to_json(c.game)}, {"solver", solver}, {"experiment", experiment_to_json(c.experiment)}};
  if (c.async) {
    j["async"] = {{"update_prob", c.async->update_prob},
                  {"max_delay", c.async->max_delay},
                  {"mode", c.async->mode == AsyncSchedule::Mode::kBernoulli ? "bernoulli" : "one_at_a_time"}};
  }
  return j;
}

// ---------------------------------------------------------------------------
// Execution

namespace {

struct Prepared {
  std::unique_ptr<GameModel> game;
  SolverConfig solver;
  std::optional<BruteForceResult> oracle;
  std::optional<StrongStabilityEstimate> strength;
  json derived = json::object();
};

BruteForceResult require_oracle(const GameModel& game) {
  BruteForceResult r = brute_force_ne(game);
  if (!r.converged) throw NumericError("equilibrium oracle failed: " + r.message);
  return r;
}

Prepared prepare(const ScenarioConfig& c, bool need_oracle) {
  Prepared p;
  p.game = build_game(c.game);
  const GameModel& game = *p.game;
  SolverConfig& s = p.solver;
  s.schedule = c.schedule.schedule;
  s.noise = c.noise.model;
  s.max_iters = c.max_iters;
  s.stop_residual = c.stop_residual;
  s.seed = c.seed;
  s.log_every = c.log_every;
  s.stochastic_oracle = c.stochastic_oracle;

  if (c.start == "baseline") {
    const auto& ee = dynamic_cast<const EeGame&>(game);
    const ActionProfile x0 = ee.uniform_baseline();
    std::vector<HermitianMatrix> y;
    for (int i = 0; i < game.num_players(); ++i) y.push_back(scores_for_action(x0[i], game.domain(i)));
    s.initial_scores = std::move(y);
  }
  if (need_oracle || c.reference == "oracle" || c.schedule.auto_strength) {
    p.oracle = require_oracle(game);
    p.derived["oracle"] = {{"residual", p.oracle->residual}, {"rounds", p.oracle->rounds},
                           {"profile", profile_json(p.oracle->profile)}};
  }
  if (c.reference == "oracle") s.reference_point = p.oracle->profile;
  if (c.schedule.auto_strength) {
    p.strength = estimate_strong_stability(game, p.oracle->profile, c.experiment.strength_samples, c.seed);
    if (!(p.strength->b_hat > 0.0)) {
      throw NumericError("strong stability estimate is zero; 'strength: auto' is undefined for this game");
    }
    s.schedule.strength = p.strength->b_hat;
    p.derived["strength"] = p.strength->b_hat;
  }
  if (c.noise.calibrated) {
    const SolverState st = s.initial_scores ? SolverState::start_from_scores(game, *s.initial_scores)
                                            : SolverState::start(game);
    s.noise.sigma = gaussian_at_level(game, st.actions, c.noise.model.level).sigma;
    p.derived["noise_sigma"] = s.noise.sigma;
  }
  return p;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

void write_fixture(const GameModel& game, const fs::path& out) {
  if (const auto* ee = dynamic_cast<const EeGame*>(&game)) {
    write_file(out / "fixture.json", dump(channels_to_json(ee->channels())));
  } else if (const auto* ml = dynamic_cast<const MetricLearningGame*>(&game)) {
    write_file(out / "fixture.json", dump(dataset_to_json(ml->data())));
  }
}

RunTrace run_once(const ScenarioConfig& c, const GameModel& game, const SolverConfig& s) {
  return c.async ? run_async(game, s, *c.async) : run(game, s);
}

CommandResult cmd_run(const ScenarioConfig& c, const fs::path& out, std::ostream* log) {
  Prepared p = prepare(c, false);
  const RunTrace t = run_once(c, *p.game, p.solver);
  const TraceRecord& last = t.last();

  std::ostringstream util, resid;
  util << "n,player,utility\n";
  resid << "n,nash_residual\n";
  for (const auto& r : t.records) {
    for (std::size_t i = 0; i < r.utility.size(); ++i) {
      util << r.n << ',' << i + 1 << ',' << format_double(r.utility[i]) << '\n';
    }
    resid << r.n << ',' << format_double(r.nash_residual) << '\n';
  }
  json summary{{"command", "run"},
               {"config", config_to_json(c)},
               {"derived", p.derived},
               {"game", {{"name", p.game->name()}, {"players", p.game->num_players()}}},
               {"status", to_string(t.status)},
               {"iterations", t.iterations},
               {"seed", t.seed},
               {"message", t.message},
               {"update_counts", t.update_counts},
               {"terminal",
                {{"nash_residual", finite_or_null(last.nash_residual)},
                 {"utility", vector_json(last.utility)},
                 {"kl_to_ref", last.kl_to_ref ? finite_or_null(*last.kl_to_ref) : json(nullptr)}}},
               {"final_actions", profile_json(t.final_actions)}};
  if (const auto* ee = dynamic_cast<const EeGame*>(p.game.get())) {
    const auto q = ee->to_covariances(t.final_actions);
    const auto qb = ee->to_covariances(ee->uniform_baseline());
    std::vector<double> eff, base;
    for (int i = 0; i < ee->num_players(); ++i) {
      eff.push_back(ee->energy_efficiency(i, q));
      base.push_back(ee->energy_efficiency(i, qb));
    }
    summary["energy_efficiency"] = {{"terminal", eff}, {"uniform_baseline", base}};
  }

  fs::create_directories(out);
  write_file(out / "trace.csv", trace_csv(t));
  write_file(out / "utility.csv", util.str());
  write_file(out / "residual.csv", resid.str());
  write_file(out / "summary.json", dump(summary));
  write_fixture(*p.game, out);

  std::ostringstream msg;
  msg << "run: " << to_string(t.status) << " after " << t.iterations << " iterations, residual "
      << format_double(last.nash_residual);
  if (!t.message.empty()) msg << " (" << t.message << ")";
  if (log) *log << msg.str() << '\n';
  const int code = t.status == RunStatus::kConverged ? 0 : t.status == RunStatus::kMaxIters ? 2 : 1;
  return {code, msg.str()};
}

CommandResult cmd_stability(const ScenarioConfig& c, const fs::path& out, std::ostream* log) {
  const auto& e = c.experiment;
  const bool want_vs = std::count(e.checks.begin(), e.checks.end(), "variational_stability") > 0;
  Prepared p = prepare(c, false);
  const GameModel& game = *p.game;
  json report{{"mode", "stability"}, {"config", config_to_json(c)}};
  bool ok = true;
  StabilityReport combined;
  combined.samples = e.samples;
  combined.rng_seed = c.seed;
  for (const auto& check : e.checks) {
    if (check == "monotonicity") {
      const StabilityReport r = check_monotonicity(game, e.samples, c.seed);
      combined.has_monotonicity = true;
      combined.monotonicity_violations = r.monotonicity_violations;
      combined.monotonicity_worst = r.monotonicity_worst;
    } else if (check == "hessian") {
      const StabilityReport r = check_hessian(game, e.samples, split_seed(c.seed, 2));
      combined.has_hessian = true;
      combined.hessian_samples = r.hessian_samples;
      combined.hessian_max_quadform = r.hessian_max_quadform;
    }
  }
  if (want_vs) {
    const BruteForceResult oracle = brute_force_ne(game);
    report["oracle"] = {{"converged", oracle.converged}, {"residual", oracle.residual},
                        {"rounds", oracle.rounds}, {"message", oracle.message},
                        {"profile", profile_json(oracle.profile)}};
    ok = ok && oracle.converged;
    if (oracle.converged) {
      const StabilityReport r =
          check_variational_stability(game, oracle.profile, e.radius, e.samples, split_seed(c.seed, 1));
      combined.has_variational_stability = true;
      combined.vs_radius = r.vs_radius;
      combined.vs_violations = r.vs_violations;
      combined.vs_worst = r.vs_worst;
      const StrongStabilityEstimate s =
          estimate_strong_stability(game, oracle.profile, e.strength_samples, split_seed(c.seed, 3), e.radius > 0 ? e.radius : 1.0);
      report["strong_stability"] = strength_json(s);
    }
  }
  report["stability"] = stability_json(combined);
  ok = ok && combined.passed();
  report["passed"] = ok;

  fs::create_directories(out);
  write_file(out / "report.json", dump(report));
  write_fixture(game, out);
  std::ostringstream msg;
  msg << "stability: " << (ok ? "passed" : "FAILED");
  if (combined.has_monotonicity) msg << ", monotonicity violations " << combined.monotonicity_violations;
  if (combined.has_variational_stability) msg << ", variational stability violations " << combined.vs_violations;
  if (combined.has_hessian) msg << ", max Hessian quadratic form " << format_double(combined.hessian_max_quadform);
  if (log) *log << msg.str() << '\n';
  return {ok ? 0 : 3, msg.str()};
}

CommandResult cmd_rate(const ScenarioConfig& c, const fs::path& out, std::ostream* log) {
  const auto& e = c.experiment;
  Prepared p = prepare(c, true);
  const GameModel& game = *p.game;
  const ActionProfile& xstar = p.oracle->profile;

  double expected = 0.0, tol = 0.0;
  const bool interior = is_interior_profile(game, xstar);
  const bool extreme = is_extreme_profile(game, xstar);
  if (e.expected_slope) {
    expected = *e.expected_slope;
  } else if (interior) {
    expected = -0.5;
  } else if (extreme) {
    expected = -1.0;
  } else {
    throw ConfigError(c.origin + ": equilibrium is neither interior nor extreme; set 'experiment.expected_slope'");
  }
  tol = e.slope_tolerance ? *e.slope_tolerance : (expected == -1.0 ? 0.2 : 0.15);

  StrongStabilityEstimate strength =
      p.strength ? *p.strength : estimate_strong_stability(game, xstar, e.strength_samples, c.seed);
  RateConfig rc;
  rc.schedule = p.solver.schedule;
  rc.noise = p.solver.noise;
  rc.seeds = e.seeds;
  rc.checkpoints = e.checkpoints;
  rc.metric = e.metric;
  rc.seed = c.seed;
  rc.b_hat = strength.b_hat;
  rc.initial_scores = p.solver.initial_scores;
  rc.stochastic_oracle = c.stochastic_oracle;
  const RateFit fit = rate_experiment(game, xstar, rc);

  const bool slope_ok = std::isfinite(fit.slope) && std::abs(fit.slope - expected) <= tol;
  const bool bound_ok = !e.bound_check || (fit.bound_ok && *fit.bound_ok);
  const bool ok = slope_ok && bound_ok;
  json report{{"mode", "rate"},
              {"config", config_to_json(c)},
              {"derived", p.derived},
              {"equilibrium", interior ? "interior" : (extreme ? "extreme" : "other")},
              {"expected_slope", expected},
              {"slope_tolerance", tol},
              {"slope_ok", slope_ok},
              {"slope_flag", !slope_ok},
              {"bound_check", e.bound_check},
              {"strong_stability", strength_json(strength)},
              {"fit", rate_json(fit)},
              {"passed", ok}};

  fs::create_directories(out);
  write_file(out / "report.json", dump(report));
  std::ostringstream curve;
  curve << "n,metric_mean,metric_stderr,kl_mean,kl_stderr\n";
  for (std::size_t j = 0; j < fit.checkpoints.size(); ++j) {
    curve << fit.checkpoints[j] << ',' << format_double(fit.values[j]) << ',' << format_double(fit.stderrs[j])
          << ',' << format_double(fit.kl_mean[j]) << ',' << format_double(fit.kl_stderr[j]) << '\n';
  }
  write_file(out / "rate.csv", curve.str());
  write_fixture(game, out);

  std::ostringstream msg;
  msg << "rate: slope " << format_double(fit.slope) << " (expected " << expected << " +- " << tol << ") "
      << (ok ? "passed" : "FAILED");
  if (fit.gamma_b_flag) msg << "; gamma*B_hat <= 1, rate bound not applicable";
  if (log) *log << msg.str() << '\n';
  return {ok ? 0 : 3, msg.str()};
}

double median(std::vector<long> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? static_cast<double>(v[m]) : 0.5 * (v[m - 1] + v[m]);
}

CommandResult cmd_sweep(const ScenarioConfig& c, const fs::path& out, std::ostream* log) {
  const auto& e = c.experiment;
  const fs::path base_dir = fs::path(c.origin).parent_path();
  std::vector<ScenarioConfig> cells;
  std::vector<Prepared> prepared;
  for (const auto& v : e.sweep_values) {
    ScenarioConfig cell = resolve(with_override(c.root, e.sweep_parameter, v), c.origin, base_dir, false);
    prepared.push_back(prepare(cell, false));
    cells.push_back(std::move(cell));
  }
  const std::size_t seeds = static_cast<std::size_t>(e.seeds);
  struct Outcome {
    RunStatus status;
    long iterations;
    double residual;
  };
  std::vector<Outcome> outcomes(cells.size() * seeds);
  parallel_for(outcomes.size(), [&](std::size_t task) {
    const std::size_t k = task / seeds, s = task % seeds;
    SolverConfig sc = prepared[k].solver;
    sc.seed = split_seed(c.seed, s);
    const RunTrace t = run_once(cells[k], *prepared[k].game, sc);
    outcomes[task] = {t.status, t.iterations, t.last().nash_residual};
  });

  std::ostringstream csv;
  csv << "parameter,value,seeds,converged,fraction,median_iterations,mean_terminal_residual\n";
  json cell_summaries = json::array();
  fs::create_directories(out / "cells");
  for (std::size_t k = 0; k < cells.size(); ++k) {
    int conv = 0;
    std::vector<long> its;
    double resid = 0.0;
    for (std::size_t s = 0; s < seeds; ++s) {
      const Outcome& o = outcomes[k * seeds + s];
      if (o.status == RunStatus::kConverged) {
        ++conv;
        its.push_back(o.iterations);
      }
      resid += o.residual;
    }
    const double frac = static_cast<double>(conv) / seeds;
    const double med = median(its);
    const std::string value = e.sweep_values[k].Scalar();
    csv << e.sweep_parameter << ',' << value << ',' << seeds << ',' << conv << ',' << format_double(frac) << ','
        << (std::isnan(med) ? std::string() : format_double(med)) << ',' << format_double(resid / seeds) << '\n';
    json cell{{"index", k},
              {"parameter", e.sweep_parameter},
              {"value", value},
              {"config", config_to_json(cells[k])},
              {"derived", prepared[k].derived},
              {"seeds", seeds},
              {"converged", conv},
              {"fraction", frac},
              {"median_iterations", finite_or_null(med)},
              {"mean_terminal_residual", finite_or_null(resid / seeds)}};
    write_file(out / "cells" / ("cell_" + std::to_string(k) + ".json"), dump(cell));
    cell_summaries.push_back({{"value", value}, {"converged", conv}, {"fraction", frac}});
    if (log) {
      *log << "sweep: " << e.sweep_parameter << " = " << value << ": " << conv << "/" << seeds
           << " converged\n";
    }
  }
  write_file(out / "sweep.csv", csv.str());
  write_file(out / "summary.json",
             dump({{"command", "sweep"}, {"config", config_to_json(c)}, {"cells", cell_summaries}}));
  write_fixture(*prepared.front().game, out);
  return {0, "sweep: " + std::to_string(cells.size()) + " cells"};
}

}  // namespace

CommandResult execute(const ScenarioConfig& config, Command command, const fs::path& out_dir,
                      std::ostream* log) {
  const std::string& mode = config.experiment.mode;
  try {
    switch (command) {
      case Command::kRun:
        if (mode != "run") return {1, config.origin + ": 'mxl run' needs experiment.mode run (got " + mode + ")"};
        return cmd_run(config, out_dir, log);
      case Command::kVerify:
        if (mode == "stability") return cmd_stability(config, out_dir, log);
        if (mode == "rate") return cmd_rate(config, out_dir, log);
        return {1, config.origin + ": 'mxl verify' needs experiment.mode rate or stability (got " + mode + ")"};
      case Command::kSweep:
        if (mode != "sweep") return {1, config.origin + ": 'mxl sweep' needs experiment.mode sweep (got " + mode + ")"};
        return cmd_sweep(config, out_dir, log);
    }
  } catch (const std::exception& e) {
    return {1, e.what()};
  }
  return {1, "unknown command"};
}

}  // namespace mxl
