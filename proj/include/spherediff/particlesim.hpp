#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "spherediff/boundary.hpp"
#include "spherediff/engine.hpp"
#include "spherediff/sources.hpp"

namespace spherediff {

/// Estimation volume around an observation point: the ball itself, or its
/// orbit under the rotations that leave the scenario invariant (a shell for
/// full-sphere scenarios, a ring around the z axis for caps and networks).
enum class KernelShape { ball, orbit };

struct OracleConfig {
  double dt = 1e-4;
  long n_particles = 200000;
  std::uint64_t seed = 1;
  double kernel_radius = 0.08;
  /// Interval between concentration snapshots.
  double sample_interval = 0.1;
  KernelShape kernel = KernelShape::orbit;
  /// Worker threads; 0 picks the hardware concurrency.
  int threads = 0;
};

/// Throws ConfigError unless dt > 0 with sqrt(2 D dt) <= R0/20,
/// 0 < kernel_radius <= R0/5, n_particles >= 1 and sample_interval > 0.
void validate_oracle_config(const OracleConfig& cfg, double R0, double D);

/// Physical setup seen by the particle simulation.
struct OracleProblem {
  double R0 = 1.0;
  double D = 0.01;
  SourceSchedule sources;
  /// Permeable part of S1; absent means fully reflective.
  std::optional<BoundaryRegion> region;
  PermeabilitySchedule gamma;
  /// When set, particles permeating S1 enter S2 with this probability.
  std::optional<double> gamma_s2;
  std::vector<ObservationPoint> observe;
  double horizon = 0.0;
};

struct Particle {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  int sphere = 0;
  bool alive = true;
};

/// Per-particle random stream derived from (seed, index).
std::mt19937_64 particle_stream(std::uint64_t seed, std::uint64_t index);

/// Number of particles assigned to each event, proportional to the event
/// masses and summing to n.
std::vector<long> allocate_particles(const SourceSchedule& sched, long n);

struct Release {
  double time = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
};

/// Release time drawn from the temporal profile of ev and position from the
/// density proportional to f_x(r) r^2 with isotropic direction.
Release sample_release(const ReleaseEvent& ev, std::mt19937_64& rng);

/// Releases for all particles in index order.
std::vector<Release> inject(const SourceSchedule& sched, long n, std::uint64_t seed);

/// Boundary behaviour for one step.
struct BoundaryRules {
  double R0 = 1.0;
  double D = 0.01;
  std::optional<BoundaryRegion> region;  // permeable part of S1
  double gamma = 0.0;                    // S1 permeability during the step
  std::optional<double> gamma_s2;        // network transfer probability
};

/// Crossing probability gamma * sqrt(pi dt / D), clamped to 1. Sets
/// *clamped when the raw value exceeds 1.
double crossing_probability(double gamma, double dt, double D, bool* clamped = nullptr);

/// Moves p by one Gaussian step of length dt and applies the boundary rules.
/// Returns true if the crossing probability had to be clamped.
bool advance(Particle& p, double dt, const BoundaryRules& rules, std::mt19937_64& rng);

/// Volume of the intersection of a ball of radius h centered at distance c
/// from the origin with the ball of radius R.
double lens_volume(double c, double h, double R);

/// True when every rotation about the origin leaves the problem invariant;
/// otherwise only rotations about the z axis do.
bool spherically_symmetric(const OracleProblem& problem);

/// Volume of the orbit kernel around x, clipped to the ball of radius R.
double orbit_volume(const SphericalPoint& x, double h, double R, bool spherical);

struct ConcentrationEstimate {
  double value = 0.0;
  double sigma = 0.0;  // binomial standard error
  long count = 0;
};

/// Counts particles inside the kernel ball around each point, divides by the
/// kernel volume clipped to the sphere and scales by M_total / n_injected.
std::vector<ConcentrationEstimate> estimate_concentration(const std::vector<Particle>& particles,
                                                          const std::vector<ObservationPoint>& points,
                                                          double kernel_radius, long n_injected, double M_total,
                                                          double R0);

struct OracleResult {
  std::vector<double> times;
  /// estimates[point][sample]
  std::vector<std::vector<ConcentrationEstimate>> estimates;
  /// mass[sphere][sample]: surviving particles times M_total / n.
  std::vector<std::vector<double>> mass;
  double injected_mass = 0.0;
  double saturation = 0.0;
  long n_particles = 0;
  long clamped_crossings = 0;
  std::vector<std::string> warnings;
};

OracleResult run_oracle(const OracleProblem& problem, const OracleConfig& cfg);

}  // namespace spherediff
