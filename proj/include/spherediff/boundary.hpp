#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "spherediff/block_matrix.hpp"
#include "spherediff/modes.hpp"

namespace spherediff {

/// Permeable part of a sphere surface: all of it, or the polar cap
/// theta in [0, theta0].
struct BoundaryRegion {
  enum class Kind { full, cap };
  Kind kind = Kind::full;
  double theta0 = 0.0;

  static BoundaryRegion full_sphere() { return {}; }
  static BoundaryRegion polar_cap(double theta0) { return {Kind::cap, theta0}; }
};

/// Throws ConfigError unless a cap has 0 < theta0 <= pi.
void validate_region(const BoundaryRegion& region);

/// Coupling generator of a permeable boundary without the permeability
/// factor. Entry (mu, mu') is
///   R0^2 j_n(k R0) j_n'(k' R0) / N_mu' * integral over the region of
///   conj(Y_n^m) Y_n'^m' dOmega.
struct FeedbackMatrix {
  BlockMatrix matrix;
  BoundaryRegion region;
  std::uint64_t mode_set_id = 0;
};

/// Linear map from the state of S1 to the boundary input of S2, including
/// the -gamma_S1 gamma_S2 factor.
struct ConnectionMatrix {
  BlockMatrix matrix;
  double theta0 = 0.0;
  double gamma_s1 = 0.0;
  double gamma_s2 = 0.0;
};

/// Initial Gauss-Legendre order of the cap integrals; doubled until no
/// entry moves by more than kCapQuadratureTol.
inline constexpr int kCapQuadratureOrder = 64;
inline constexpr double kCapQuadratureTol = 1e-10;

/// Normalized angular overlaps 2 pi * integral over [0, theta0] of
/// P_n^m P_n'^m sin(theta) dtheta for n, n' = |m| .. n_max, indexed by
/// n - |m|.
Eigen::MatrixXd cap_overlap(int m, int n_max, double theta0);

/// Full sphere: one block per (n, m), storage shared across m.
/// Cap: one block per m.
FeedbackMatrix build_feedback_matrix(const ModeSet& ms, const BoundaryRegion& region);

/// Throws ConfigError when the mode sets differ in R0, D or Q, or when the
/// cap angle or permeabilities are out of range.
ConnectionMatrix build_connection_matrix(const ModeSet& ms_s1, const ModeSet& ms_s2, double theta0, double gamma_s1,
                                         double gamma_s2);

}  // namespace spherediff
