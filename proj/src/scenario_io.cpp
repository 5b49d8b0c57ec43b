#include "spherediff/scenario_io.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "spherediff/errors.hpp"

namespace spherediff {

namespace {

using nlohmann::json;
constexpr double kPi = std::numbers::pi;

void require_object(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) throw ConfigError((path.empty() ? "" : path + ".") + item.key() + ": unknown key");
  }
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

const json* find(const json& j, const std::string& key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path + ": must be finite");
  return v;
}

double number_field(const json& obj, const std::string& path, const std::string& key, std::optional<double> fallback) {
  const json* v = find(obj, key);
  if (v == nullptr) {
    if (!fallback) throw ConfigError(join(path, key) + ": required");
    return *fallback;
  }
  return get_number(*v, join(path, key));
}

long integer_field(const json& obj, const std::string& path, const std::string& key, std::optional<long> fallback) {
  const json* v = find(obj, key);
  if (v == nullptr) {
    if (!fallback) throw ConfigError(join(path, key) + ": required");
    return *fallback;
  }
  if (!v->is_number_integer()) throw ConfigError(join(path, key) + ": expected an integer");
  return v->get<long>();
}

bool bool_field(const json& obj, const std::string& path, const std::string& key, bool fallback) {
  const json* v = find(obj, key);
  if (v == nullptr) return fallback;
  if (!v->is_boolean()) throw ConfigError(join(path, key) + ": expected a boolean");
  return v->get<bool>();
}

std::string string_field(const json& obj, const std::string& path, const std::string& key,
                         std::optional<std::string> fallback) {
  const json* v = find(obj, key);
  if (v == nullptr) {
    if (!fallback) throw ConfigError(join(path, key) + ": required");
    return *fallback;
  }
  if (!v->is_string()) throw ConfigError(join(path, key) + ": expected a string");
  return v->get<std::string>();
}

const json& require(const json& obj, const std::string& key) {
  const json* v = find(obj, key);
  if (v == nullptr) throw ConfigError(key + ": required");
  return *v;
}

}  // namespace

ScenarioFile parse_scenario(const json& doc) {
  require_object(doc, "", {"sphere", "releases", "permeability", "region", "network", "observe", "horizon", "oracle",
                           "output"});
  ScenarioFile sf;

  const json& sphere = require(doc, "sphere");
  require_object(sphere, "sphere", {"R0", "D", "Q", "T"});
  sf.R0 = number_field(sphere, "sphere", "R0", 1.0);
  sf.D = number_field(sphere, "sphere", "D", 0.01);
  const long Q = integer_field(sphere, "sphere", "Q", 240);
  sf.T = number_field(sphere, "sphere", "T", 0.01);
  if (!(sf.R0 > 0.0)) throw ConfigError("sphere.R0: must be positive");
  if (!(sf.D > 0.0)) throw ConfigError("sphere.D: must be positive");
  if (Q < 1 || Q > 10'000'000) throw ConfigError("sphere.Q: must lie in [1, 1e7]");
  sf.Q = static_cast<int>(Q);
  if (!(sf.T > 0.0)) throw ConfigError("sphere.T: must be positive");

  const json& releases = require(doc, "releases");
  if (!releases.is_array() || releases.empty()) throw ConfigError("releases: expected a non-empty array");
  for (std::size_t i = 0; i < releases.size(); ++i) {
    const std::string path = "releases[" + std::to_string(i) + "]";
    require_object(releases[i], path, {"t_start", "t0", "r0", "amount_scale"});
    ReleaseEvent ev;
    ev.t_start = number_field(releases[i], path, "t_start", std::nullopt);
    ev.t0 = number_field(releases[i], path, "t0", std::nullopt);
    ev.r0 = number_field(releases[i], path, "r0", std::nullopt);
    ev.amount_scale = number_field(releases[i], path, "amount_scale", 1.0);
    if (!(ev.t0 > 0.0)) throw ConfigError(path + ".t0: must be positive");
    if (!(ev.r0 > 0.0) || ev.r0 > sf.R0) throw ConfigError(path + ".r0: must lie in (0, R0]");
    if (!(ev.amount_scale >= 0.0)) throw ConfigError(path + ".amount_scale: must be non-negative");
    sf.releases.push_back(ev);
  }

  if (const json* perm = find(doc, "permeability")) {
    require_object(*perm, "permeability", {"mode", "gamma", "schedule"});
    const std::string mode = string_field(*perm, "permeability", "mode", std::nullopt);
    if (mode == "constant") {
      if (find(*perm, "schedule")) throw ConfigError("permeability.schedule: not allowed with mode constant");
      const double g = number_field(*perm, "permeability", "gamma", std::nullopt);
      if (!(g >= 0.0)) throw ConfigError("permeability.gamma: must be non-negative");
      sf.permeability = PermeabilitySchedule::constant(g);
    } else if (mode == "schedule") {
      if (find(*perm, "gamma")) throw ConfigError("permeability.gamma: not allowed with mode schedule");
      const json* sched = find(*perm, "schedule");
      if (sched == nullptr || !sched->is_array() || sched->empty()) {
        throw ConfigError("permeability.schedule: expected a non-empty array");
      }
      std::vector<std::pair<double, double>> levels;
      for (std::size_t i = 0; i < sched->size(); ++i) {
        const std::string path = "permeability.schedule[" + std::to_string(i) + "]";
        require_object((*sched)[i], path, {"t_from", "gamma"});
        const double t_from = number_field((*sched)[i], path, "t_from", std::nullopt);
        const double g = number_field((*sched)[i], path, "gamma", std::nullopt);
        if (!(g >= 0.0)) throw ConfigError(path + ".gamma: must be non-negative");
        if (!levels.empty() && !(t_from > levels.back().first)) {
          throw ConfigError(path + ".t_from: must be strictly increasing");
        }
        levels.emplace_back(t_from, g);
      }
      sf.permeability = PermeabilitySchedule::piecewise(std::move(levels));
    } else {
      throw ConfigError("permeability.mode: expected \"constant\" or \"schedule\"");
    }
  }

  if (const json* region = find(doc, "region")) {
    require_object(*region, "region", {"kind", "theta0"});
    const std::string kind = string_field(*region, "region", "kind", std::nullopt);
    if (kind == "full") {
      if (find(*region, "theta0")) throw ConfigError("region.theta0: only allowed for kind cap");
      sf.region = BoundaryRegion::full_sphere();
    } else if (kind == "cap") {
      const double theta0 = number_field(*region, "region", "theta0", std::nullopt);
      if (!(theta0 > 0.0 && theta0 <= kPi)) throw ConfigError("region.theta0: must lie in (0, pi]");
      sf.region = BoundaryRegion::polar_cap(theta0);
    } else {
      throw ConfigError("region.kind: expected \"full\" or \"cap\"");
    }
  }

  if (const json* net = find(doc, "network")) {
    require_object(*net, "network", {"enabled", "gamma_s1", "gamma_s2", "theta0"});
    sf.network.enabled = bool_field(*net, "network", "enabled", true);
    if (sf.network.enabled) {
      sf.network.gamma_s1 = number_field(*net, "network", "gamma_s1", std::nullopt);
      sf.network.gamma_s2 = number_field(*net, "network", "gamma_s2", 1.0);
      sf.network.theta0 = number_field(*net, "network", "theta0", std::nullopt);
      if (!(sf.network.gamma_s1 >= 0.0)) throw ConfigError("network.gamma_s1: must be non-negative");
      if (!(sf.network.gamma_s2 >= 0.0)) throw ConfigError("network.gamma_s2: must be non-negative");
      if (!(sf.network.theta0 > 0.0 && sf.network.theta0 <= kPi)) {
        throw ConfigError("network.theta0: must lie in (0, pi]");
      }
      if (find(doc, "permeability")) throw ConfigError("permeability: not allowed when network is enabled");
      if (find(doc, "region")) throw ConfigError("region: not allowed when network is enabled");
    }
  }

  const json& observe = require(doc, "observe");
  if (!observe.is_array() || observe.empty()) throw ConfigError("observe: expected a non-empty array");
  for (std::size_t i = 0; i < observe.size(); ++i) {
    const std::string path = "observe[" + std::to_string(i) + "]";
    require_object(observe[i], path, {"r", "phi", "theta", "sphere"});
    ObservationPoint op;
    op.x.r = number_field(observe[i], path, "r", std::nullopt);
    op.x.phi = number_field(observe[i], path, "phi", std::nullopt);
    op.x.theta = number_field(observe[i], path, "theta", std::nullopt);
    const long sphere = integer_field(observe[i], path, "sphere", 1);
    if (!(op.x.r >= 0.0) || op.x.r > sf.R0) throw ConfigError(path + ".r: point outside the sphere");
    if (!(op.x.phi >= -kPi && op.x.phi <= kPi)) throw ConfigError(path + ".phi: must lie in [-pi, pi]");
    if (!(op.x.theta >= 0.0 && op.x.theta <= kPi)) throw ConfigError(path + ".theta: must lie in [0, pi]");
    if (sphere < 1 || sphere > (sf.network.enabled ? 2 : 1)) throw ConfigError(path + ".sphere: no such sphere");
    op.sphere = static_cast<int>(sphere - 1);
    sf.observe.push_back(op);
  }

  sf.horizon = get_number(require(doc, "horizon"), "horizon");
  if (!(sf.horizon > 0.0)) throw ConfigError("horizon: must be positive");
  const double steps = sf.horizon / sf.T;
  if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps)) {
    throw ConfigError("horizon: must be an integer multiple of sphere.T");
  }

  if (const json* oracle = find(doc, "oracle")) {
    require_object(*oracle, "oracle", {"dt", "n_particles", "seed", "kernel_radius", "sample_interval", "kernel"});
    sf.oracle.dt = number_field(*oracle, "oracle", "dt", sf.oracle.dt);
    sf.oracle.n_particles = integer_field(*oracle, "oracle", "n_particles", sf.oracle.n_particles);
    const long seed = integer_field(*oracle, "oracle", "seed", 1);
    if (seed < 0) throw ConfigError("oracle.seed: must be non-negative");
    sf.oracle.seed = static_cast<std::uint64_t>(seed);
    sf.oracle.kernel_radius = number_field(*oracle, "oracle", "kernel_radius", 0.08 * sf.R0);
    sf.oracle.sample_interval = number_field(*oracle, "oracle", "sample_interval", sf.oracle.sample_interval);
    const std::string kernel = string_field(*oracle, "oracle", "kernel", std::string("orbit"));
    if (kernel == "orbit") {
      sf.oracle.kernel = KernelShape::orbit;
    } else if (kernel == "ball") {
      sf.oracle.kernel = KernelShape::ball;
    } else {
      throw ConfigError("oracle.kernel: expected \"orbit\" or \"ball\"");
    }
  } else {
    sf.oracle.kernel_radius = 0.08 * sf.R0;
  }
  validate_oracle_config(sf.oracle, sf.R0, sf.D);
  const double ratio = sf.oracle.sample_interval / sf.T;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio)) {
    throw ConfigError("oracle.sample_interval: must be an integer multiple of sphere.T");
  }

  if (const json* out = find(doc, "output")) {
    require_object(*out, "output", {"normalized", "path"});
    sf.normalized = bool_field(*out, "output", "normalized", false);
    sf.output_path = string_field(*out, "output", "path", std::string());
  }
  return sf;
}

ScenarioFile load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open scenario file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
  return parse_scenario(doc);
}

json to_json(const ScenarioFile& sf) {
  json doc;
  doc["sphere"] = {{"R0", sf.R0}, {"D", sf.D}, {"Q", sf.Q}, {"T", sf.T}};
  doc["releases"] = json::array();
  for (const ReleaseEvent& ev : sf.releases) {
    doc["releases"].push_back({{"t_start", ev.t_start}, {"t0", ev.t0}, {"r0", ev.r0}, {"amount_scale", ev.amount_scale}});
  }
  if (sf.permeability) {
    const auto& levels = sf.permeability->levels();
    if (levels.size() == 1 && std::isinf(levels.front().first)) {
      doc["permeability"] = {{"mode", "constant"}, {"gamma", levels.front().second}};
    } else {
      json sched = json::array();
      for (const auto& [t_from, g] : levels) sched.push_back({{"t_from", t_from}, {"gamma", g}});
      doc["permeability"] = {{"mode", "schedule"}, {"schedule", sched}};
    }
    if (sf.region.kind == BoundaryRegion::Kind::cap) {
      doc["region"] = {{"kind", "cap"}, {"theta0", sf.region.theta0}};
    } else {
      doc["region"] = {{"kind", "full"}};
    }
  }
  if (sf.network.enabled) {
    doc["network"] = {{"enabled", true},
                      {"gamma_s1", sf.network.gamma_s1},
                      {"gamma_s2", sf.network.gamma_s2},
                      {"theta0", sf.network.theta0}};
  }
  doc["observe"] = json::array();
  for (const ObservationPoint& op : sf.observe) {
    json p = {{"r", op.x.r}, {"phi", op.x.phi}, {"theta", op.x.theta}};
    if (sf.network.enabled) p["sphere"] = op.sphere + 1;
    doc["observe"].push_back(p);
  }
  doc["horizon"] = sf.horizon;
  doc["oracle"] = {{"dt", sf.oracle.dt},
                   {"n_particles", sf.oracle.n_particles},
                   {"seed", sf.oracle.seed},
                   {"kernel_radius", sf.oracle.kernel_radius},
                   {"sample_interval", sf.oracle.sample_interval},
                   {"kernel", sf.oracle.kernel == KernelShape::orbit ? "orbit" : "ball"}};
  doc["output"] = {{"normalized", sf.normalized}, {"path", sf.output_path}};
  return doc;
}

Scenario build_scenario(const ScenarioFile& sf) {
  Scenario sc;
  const ModeSet ms = enumerate_modes(sf.R0, sf.D, sf.Q);
  sc.sources = SourceSchedule(sf.releases);
  sc.observe = sf.observe;
  sc.T = sf.T;
  sc.horizon = sf.horizon;
  sc.normalized = sf.normalized;
  if (sf.network.enabled) {
    SphereModel s1{ms, build_feedback_matrix(ms, BoundaryRegion::polar_cap(sf.network.theta0)),
                   PermeabilitySchedule::constant(sf.network.gamma_s1)};
    SphereModel s2{ms, std::nullopt, PermeabilitySchedule::constant(0.0)};
    sc.spheres = {std::move(s1), std::move(s2)};
    sc.connection = build_connection_matrix(ms, ms, sf.network.theta0, sf.network.gamma_s1, sf.network.gamma_s2);
  } else if (sf.permeability) {
    sc.spheres.push_back({ms, build_feedback_matrix(ms, sf.region), *sf.permeability});
  } else {
    sc.spheres.push_back({ms, std::nullopt, PermeabilitySchedule::constant(0.0)});
  }
  validate_scenario(sc);
  return sc;
}

OracleProblem build_oracle_problem(const ScenarioFile& sf) {
  OracleProblem op;
  op.R0 = sf.R0;
  op.D = sf.D;
  op.sources = SourceSchedule(sf.releases);
  op.observe = sf.observe;
  op.horizon = sf.horizon;
  if (sf.network.enabled) {
    op.region = BoundaryRegion::polar_cap(sf.network.theta0);
    op.gamma = PermeabilitySchedule::constant(sf.network.gamma_s1);
    op.gamma_s2 = sf.network.gamma_s2;
  } else if (sf.permeability) {
    op.region = sf.region;
    op.gamma = *sf.permeability;
  }
  return op;
}

namespace {

// Modal truncation of the built-in scenarios. Large enough that the
// centered-source curves converge at the observation points; only the
// excited blocks are ever advanced.
constexpr int kPresetModes = 150000;
constexpr int kNetworkPresetModes = 20000;

ScenarioFile fig4_base() {
  ScenarioFile sf;
  sf.R0 = 1.0;
  sf.D = 1e-2;
  sf.Q = kPresetModes;
  sf.T = 0.01;
  sf.releases = {{0.25, 0.1, 0.1, 1.0}, {3.0, 0.1, 0.1, 1.0}};
  sf.observe = {{{0.4, kPi / 3.0, kPi / 4.0}, 0}, {{0.9, kPi / 3.0, kPi / 4.0}, 0}};
  sf.horizon = 50.0;
  sf.oracle.kernel_radius = 0.08;
  sf.normalized = true;
  return sf;
}

std::string gamma_label(double g) {
  std::ostringstream s;
  s << g;
  return s.str();
}

}  // namespace

std::vector<std::pair<std::string, ScenarioFile>> preset(const std::string& name) {
  std::vector<std::pair<std::string, ScenarioFile>> out;
  if (name == "fig4") {
    for (double g : {0.0, 1e-2, 1e-1}) {
      ScenarioFile sf = fig4_base();
      sf.permeability = PermeabilitySchedule::constant(g);
      const std::string stem = "fig4_gamma" + gamma_label(g);
      sf.output_path = stem + ".csv";
      out.emplace_back(stem, sf);
    }
  } else if (name == "fig5") {
    ScenarioFile sf = fig4_base();
    sf.observe = {{{0.9, kPi / 3.0, kPi / 4.0}, 0}};
    // Closed for 5 s, open for 5 s, repeating.
    std::vector<std::pair<double, double>> levels;
    for (int i = 0; i < 8; ++i) levels.emplace_back(5.0 * i, i % 2 == 0 ? 0.0 : 0.1);
    sf.permeability = PermeabilitySchedule::piecewise(levels);
    sf.horizon = 40.0;
    sf.output_path = "fig5.csv";
    out.emplace_back("fig5", sf);
  } else if (name == "fig6") {
    for (double g1 : {0.1, 0.0}) {
      ScenarioFile sf;
      sf.R0 = 1.0;
      sf.D = 1e-2;
      sf.Q = kNetworkPresetModes;
      sf.T = 0.01;
      sf.releases = {{0.25, 0.4, 0.4, 1.0}, {3.0, 0.4, 0.4, 1.0}};
      sf.network = {true, g1, 1.0, kPi / 4.0};
      sf.observe = {{{1.0, kPi / 2.0, 0.0}, 0}, {{1.0, kPi / 2.0, 0.0}, 1}, {{0.1, kPi / 2.0, 0.0}, 1}};
      // Five dominant coupling time constants (about 147 s each) after the
      // last release.
      sf.horizon = 750.0;
      sf.oracle.kernel_radius = 0.08;
      sf.normalized = true;
      const std::string stem = g1 > 0.0 ? "fig6" : "fig6_reflective";
      sf.output_path = stem + ".csv";
      out.emplace_back(stem, sf);
    }
  } else {
    throw ConfigError("presets: unknown preset \"" + name + "\" (expected fig4, fig5 or fig6)");
  }
  return out;
}

}  // namespace spherediff
