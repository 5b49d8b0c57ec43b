#pragma once

#include <complex>
#include <vector>

namespace spherediff {

/// Ascending wavenumbers k with d/dr j_n(k r) = 0 at r = R0.
struct RootList {
  int n = 0;
  double R0 = 1.0;
  std::vector<double> roots;
};

/// Spherical Bessel function of the first kind j_n(x).
///
/// Small arguments use the power series, n <= 2 the closed trigonometric
/// forms, and higher orders upward recurrence (x > n) or Miller's downward
/// recurrence (x <= n). Throws std::domain_error for n < 0, x < 0 or
/// non-finite x.
double spherical_bessel_j(int n, double x);

/// d/dx j_n(x), via j_n' = (n j_{n-1} - (n+1) j_{n+1}) / (2n+1) which has no
/// 1/x singularity; j_0' = -j_1.
double spherical_bessel_j_prime(int n, double x);

/// Step of the bracketing scan in units of k*R0.
inline constexpr double kRootScanStep = 0.7853981633974483;  // pi/4
/// Bisection tolerance in units of k*R0.
inline constexpr double kRootTolerance = 1e-12;

/// The first `count` Neumann wavenumbers of order n for a sphere of radius
/// R0. k = 0 is included (as the first entry) only for n = 0.
///
/// The scan covers k*R0 in (0, n + 10 + (count + 1) pi]; failing to bracket
/// all roots there throws NumericalError naming n and the scanned range.
RootList bessel_prime_roots(int n, int count, double R0);

/// All Neumann wavenumbers of order n with k <= k_max (k = 0 for n = 0).
RootList bessel_prime_roots_upto(int n, double k_max, double R0);

/// Orthonormal associated Legendre factor: Y_n^m(theta, phi) equals
/// normalized_legendre(n, m, cos theta) * exp(i m phi). Includes the
/// Condon-Shortley phase. Requires 0 <= m <= n.
double normalized_legendre(int n, int m, double x);

/// normalized_legendre(l, m, x) for l = m .. lmax, indexed by l - m.
std::vector<double> normalized_legendre_column(int m, int lmax, double x);

/// Orthonormal complex spherical harmonic Y_n^m(theta, phi) with the
/// Condon-Shortley phase, Y_n^{-m} = (-1)^m conj(Y_n^m). Throws
/// std::domain_error for |m| > n.
std::complex<double> spherical_harmonic(int n, int m, double theta, double phi);

/// dY_n^m / dtheta from the ladder identity
///   2 dY/dtheta = sqrt((n-m)(n+m+1)) e^{-i phi} Y_n^{m+1}
///               - sqrt((n+m)(n-m+1)) e^{+i phi} Y_n^{m-1},
/// finite at the poles.
std::complex<double> spherical_harmonic_dtheta(int n, int m, double theta, double phi);

/// Y_n^m / sin(theta) with the analytic limit at the poles (finite for
/// |m| = 1, zero for |m| >= 2). Only meaningful for m != 0.
std::complex<double> spherical_harmonic_over_sin(int n, int m, double theta, double phi);

}  // namespace spherediff
