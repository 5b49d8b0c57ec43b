#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "spherediff/engine.hpp"
#include "spherediff/particlesim.hpp"

namespace spherediff {

/// Engine CSV: t,point_id,p,i_r,i_theta,i_phi,mass[,sphere_id].
void write_engine_csv(std::ostream& out, const std::vector<ObservationPoint>& observe, const SimulationResult& res,
                      bool network);
/// Oracle CSV with the same columns; flux columns are nan.
void write_oracle_csv(std::ostream& out, const std::vector<ObservationPoint>& observe, const OracleResult& res,
                      bool network, bool normalized);

struct PointComparison {
  int point_id = 0;
  double peak = 0.0;               // engine peak concentration
  double max_deviation = 0.0;      // max |engine - oracle| / peak
  double worst_ratio = 0.0;        // max |engine - oracle| / tolerance
  long exceedances = 0;            // samples beyond max(tol * peak, 3 sigma)
};

struct ComparisonReport {
  std::vector<PointComparison> points;
  bool pass = true;
};

/// Compares at the oracle sample times. Both results must be in absolute
/// units and share the observation points; engine samples are matched by
/// time index t / T.
ComparisonReport compare_results(const SimulationResult& engine, const OracleResult& oracle, double T, double tol);

/// Command-line entry point. Exit codes: 0 success, 1 comparison above
/// tolerance, 2 configuration or usage error, 3 numerical failure.
int run_cli(int argc, char** argv);

}  // namespace spherediff
