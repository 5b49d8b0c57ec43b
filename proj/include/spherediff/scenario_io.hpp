#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "spherediff/boundary.hpp"
#include "spherediff/engine.hpp"
#include "spherediff/particlesim.hpp"
#include "spherediff/sources.hpp"

namespace spherediff {

struct NetworkSpec {
  bool enabled = false;
  double gamma_s1 = 0.0;
  double gamma_s2 = 1.0;
  double theta0 = 0.0;
};

/// Validated contents of a scenario JSON document.
struct ScenarioFile {
  double R0 = 1.0;
  double D = 0.01;
  int Q = 240;
  double T = 0.01;
  std::vector<ReleaseEvent> releases;
  /// Absent means a reflective sphere.
  std::optional<PermeabilitySchedule> permeability;
  BoundaryRegion region;
  NetworkSpec network;
  std::vector<ObservationPoint> observe;
  double horizon = 0.0;
  OracleConfig oracle;
  bool normalized = false;
  std::string output_path;
};

/// Throws ConfigError naming the offending field path, e.g.
/// "releases[1].t0: must be positive". Unknown keys are rejected.
ScenarioFile parse_scenario(const nlohmann::json& doc);
ScenarioFile load_scenario(const std::string& path);
nlohmann::json to_json(const ScenarioFile& sf);

/// Enumerates modes and builds the boundary matrices.
Scenario build_scenario(const ScenarioFile& sf);
OracleProblem build_oracle_problem(const ScenarioFile& sf);

/// Built-in scenarios: "fig4" (three permeabilities), "fig5", "fig6" (with
/// and without S1 permeability). Returns (file stem, scenario) pairs.
std::vector<std::pair<std::string, ScenarioFile>> preset(const std::string& name);

}  // namespace spherediff
