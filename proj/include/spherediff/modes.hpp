#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace spherediff {

/// Point in spherical coordinates: radius, azimuth phi in [-pi, pi], polar
/// angle theta in [0, pi].
struct SphericalPoint {
  double r = 0.0;
  double phi = 0.0;
  double theta = 0.0;
};

/// One eigenmode (n, nu, m) of the Neumann Laplacian on the ball.
struct ModeIndex {
  int mu = 0;      // position in the ordered mode set
  int n = 0;       // order
  int nu = 0;      // radial root counter, 0-based
  int m = 0;       // degree, |m| <= n
  double k = 0.0;  // wavenumber
  double s = 0.0;  // eigenvalue -D k^2
  double N = 0.0;  // normalization, integral of j_n(k r)^2 r^2 over [0, R0]
};

/// Radial, polar and azimuthal flux components.
template <typename T>
struct FluxComponents {
  T radial{};
  T theta{};
  T phi{};
};

using FluxKernel = FluxComponents<std::complex<double>>;

/// Concentration and flux at one point.
struct FieldVector {
  double p = 0.0;
  double i_r = 0.0;
  double i_theta = 0.0;
  double i_phi = 0.0;
};

/// Indices of the modes that share a coupling block.
struct ModeBlock {
  int n = -1;  // -1 when the block spans several orders
  int m = 0;
  std::vector<int> modes;
};

/// Truncated, ordered eigensystem of one sphere. Immutable; copies share the
/// underlying storage and the identity used by caches.
class ModeSet {
 public:
  /// Modes ordered by |s| ascending, ties by (n, m). Complete multiplets
  /// only, so size() may exceed Q.
  static ModeSet enumerate(double R0, double D, int Q);

  double radius() const;
  double diffusion() const;
  int requested() const;
  int size() const;
  std::uint64_t id() const;

  std::span<const ModeIndex> modes() const;
  const ModeIndex& operator[](int mu) const;

  /// Largest |s| among the included modes.
  double max_decay_rate() const;

  /// j_n(k R0) for each mode, indexed by mu.
  std::span<const double> boundary_values() const;

  /// sqrt(4 pi) * integral of j_0(k r) r^2 over [0, R0] for n = m = 0 modes,
  /// zero otherwise. Used for mass accounting.
  std::span<const double> mass_weights() const;

  /// Blocks that a full-sphere boundary couples: one per (n, m).
  std::vector<ModeBlock> blocks_by_order_degree() const;
  /// Blocks that an axisymmetric cap couples: one per m.
  std::vector<ModeBlock> blocks_by_degree() const;

  /// Concentration kernel j_n(k r) Y_n^m(theta, phi).
  std::complex<double> eval_K1(const ModeIndex& mode, const SphericalPoint& x) const;
  /// Flux kernels -D grad(j_n(k r) Y_n^m), with analytic limits at r = 0 and
  /// at the poles.
  FluxKernel eval_K_flux(const ModeIndex& mode, const SphericalPoint& x) const;
  /// Adjoint concentration kernel j_n(k r) conj(Y_n^m(theta, phi)).
  std::complex<double> eval_K4_adjoint(const ModeIndex& mode, const SphericalPoint& x) const;

 private:
  struct Impl;
  explicit ModeSet(std::shared_ptr<const Impl> impl);
  std::shared_ptr<const Impl> impl_;
};

inline ModeSet enumerate_modes(double R0, double D, int Q) { return ModeSet::enumerate(R0, D, Q); }

/// Closed-form normalization: R0^3/3 for k = 0, otherwise
/// (R0^3/2) j_n(k R0)^2 (1 - n(n+1)/(k R0)^2).
double normalization(const ModeIndex& mode, double R0);

/// Adaptive-quadrature value of the integral of j_n(k r)^2 r^2 over [0, R0].
double normalization_quadrature(int n, double k, double R0);

}  // namespace spherediff
