#pragma once

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "spherediff/block_matrix.hpp"
#include "spherediff/boundary.hpp"
#include "spherediff/modes.hpp"
#include "spherediff/sources.hpp"

namespace spherediff {

/// Piecewise-constant permeability. Each level {t_from, gamma} holds until
/// the next one starts; before the first level gamma is 0.
class PermeabilitySchedule {
 public:
  PermeabilitySchedule() = default;
  static PermeabilitySchedule constant(double gamma);
  /// Throws ConfigError for negative or non-finite gammas, or t_from values
  /// that are not strictly increasing.
  static PermeabilitySchedule piecewise(std::vector<std::pair<double, double>> levels);

  double at(double t) const;
  const std::vector<std::pair<double, double>>& levels() const { return levels_; }
  double max_gamma() const;

 private:
  std::vector<std::pair<double, double>> levels_;
};

struct SphereModel {
  ModeSet modes;
  std::optional<FeedbackMatrix> feedback;
  PermeabilitySchedule gamma;
};

struct ObservationPoint {
  SphericalPoint x;
  int sphere = 0;  // 0 = S1, 1 = S2
};

/// One or two spheres. Sources feed sphere 0; a connection matrix makes
/// sphere 1 receive the cap outflow of sphere 0.
struct Scenario {
  std::vector<SphereModel> spheres;
  SourceSchedule sources;
  std::optional<ConnectionMatrix> connection;
  std::vector<ObservationPoint> observe;
  double T = 0.01;
  double horizon = 0.0;
  bool normalized = false;
};

/// Throws ConfigError for a malformed scenario: wrong sphere count, points
/// outside the ball, a horizon that is not a positive multiple of T, or
/// release radii beyond R0.
void validate_scenario(const Scenario& sc);

struct SimulationResult {
  std::vector<double> times;
  /// fields[point][step]
  std::vector<std::vector<FieldVector>> fields;
  /// mass[sphere][step]
  std::vector<std::vector<double>> mass;
  double injected_mass = 0.0;
  /// M_total / V, the reflective saturation concentration.
  double saturation = 0.0;
  /// Largest |Im p| / (|Re p| + 1e-300) over all samples with |Im p| > 1e-15.
  double max_imag_ratio = 0.0;
  /// Modal state of each sphere at the horizon.
  std::vector<Eigen::VectorXcd> final_states;
  /// Number of coupling blocks that were ever excited, per sphere.
  std::vector<int> active_blocks;
};

/// Caches discretized coupling blocks exp((diag(s) - gamma F) T) of one
/// sphere. Blocks follow the feedback matrix when present, otherwise one
/// diagonal block per (n, m). Safe for concurrent use.
class Discretizer {
 public:
  Discretizer(ModeSet ms, const FeedbackMatrix* fb, double T);

  const ModeSet& modes() const { return ms_; }
  double step() const { return T_; }
  const std::vector<MatrixBlock>& partition() const { return partition_; }
  int block_of(int mu) const { return block_of_[mu]; }

  /// Generator diag(s) - gamma F restricted to block b.
  Eigen::MatrixXd generator(int b, double gamma) const;
  /// exp(generator * T); throws NumericalError on non-finite entries.
  std::shared_ptr<const Eigen::MatrixXd> transition(int b, double gamma) const;

 private:
  ModeSet ms_;
  double T_;
  std::vector<MatrixBlock> partition_;
  std::vector<bool> has_feedback_;
  std::vector<int> block_of_;
  mutable std::mutex mutex_;
  mutable std::map<std::tuple<const void*, int, double>, std::shared_ptr<const Eigen::MatrixXd>> cache_;
};

/// Full transition matrix as a block matrix; blocks whose generator is
/// identical share storage.
BlockMatrix discretize(const ModeSet& ms, const FeedbackMatrix* fb, double gamma, double T);

/// y[k+1] = A_d y[k] + T f + T phi.
Eigen::VectorXcd step(const Eigen::VectorXcd& state, const BlockMatrix& A_d, const Eigen::VectorXcd& f,
                      const Eigen::VectorXcd& phi, double T);

/// Integral of p over the ball.
double total_mass(const ModeSet& ms, const Eigen::VectorXcd& state);

/// Concentration and fluxes at x. The imaginary part of p is written to
/// imag_p when given.
FieldVector reconstruct(const ModeSet& ms, const Eigen::VectorXcd& state, const SphericalPoint& x,
                        double* imag_p = nullptr);

/// Eigenvalues of diag(s) - gamma F for each partition block.
struct BlockSpectrum {
  int n = -1;
  int m = 0;
  std::vector<int> modes;
  Eigen::VectorXcd eigenvalues;  // sorted by real part, descending
};
std::vector<BlockSpectrum> closed_loop_spectrum(const ModeSet& ms, const FeedbackMatrix* fb, double gamma);

/// Largest real part among the eigenvalues of the block holding the
/// (0, 0, 0) mode, excluding the conserved zero eigenvalue when gamma = 0.
double dominant_eigenvalue(const ModeSet& ms, const FeedbackMatrix* fb, double gamma);

SimulationResult simulate(const Scenario& sc);
/// Two-sphere variant; requires a connection matrix.
SimulationResult simulate_network(const Scenario& sc);

}  // namespace spherediff
