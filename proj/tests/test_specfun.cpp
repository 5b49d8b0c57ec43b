#include <cmath>
#include <numbers>
#include <stdexcept>

#include "doctest.h"
#include "spherediff/errors.hpp"
#include "spherediff/quadrature.hpp"
#include "spherediff/specfun.hpp"

using namespace spherediff;
using std::numbers::pi;

TEST_CASE("spherical_bessel_j examples") {
  CHECK(spherical_bessel_j(0, pi) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(spherical_bessel_j(0, 0.0) == 1.0);
  CHECK(spherical_bessel_j(3, 0.0) == 0.0);
  // first maximum of j_1, oracle from the closed form
  const double x = 2.081576;
  const double closed = std::sin(x) / (x * x) - std::cos(x) / x;
  CHECK(spherical_bessel_j(1, x) == doctest::Approx(closed).epsilon(1e-14));
  CHECK(spherical_bessel_j(1, x) == doctest::Approx(0.436182).epsilon(1e-6));
}

TEST_CASE("spherical_bessel_j agrees with the standard library") {
  for (int n = 0; n <= 30; ++n) {
    for (double x : {1e-6, 1e-3, 0.05, 0.5, 1.0, 3.7, 9.9, 20.0, 47.3, 120.0}) {
      const double ref = std::sph_bessel(static_cast<unsigned>(n), x);
      const double got = spherical_bessel_j(n, x);
      CHECK(std::abs(got - ref) <= 1e-12 * std::max(std::abs(ref), 1e-300) + 1e-15);
    }
  }
}

TEST_CASE("spherical_bessel_j domain errors") {
  CHECK_THROWS_AS(spherical_bessel_j(-1, 1.0), std::domain_error);
  CHECK_THROWS_AS(spherical_bessel_j(0, -1.0), std::domain_error);
  CHECK_THROWS_AS(spherical_bessel_j(0, std::nan("")), std::domain_error);
  CHECK_THROWS_AS(spherical_bessel_j_prime(2, -0.5), std::domain_error);
}

TEST_CASE("three-term recurrence residual") {
  for (int n = 1; n <= 12; ++n) {
    for (double x = 0.1; x <= 50.0; x += 0.37) {
      const double res = spherical_bessel_j(n + 1, x) - (2.0 * n + 1.0) / x * spherical_bessel_j(n, x) +
                         spherical_bessel_j(n - 1, x);
      CHECK(std::abs(res) < 1e-10);
    }
  }
}

TEST_CASE("spherical_bessel_j_prime") {
  CHECK(spherical_bessel_j_prime(0, 0.0) == 0.0);
  CHECK(spherical_bessel_j_prime(1, 0.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(std::abs(spherical_bessel_j_prime(0, 4.493409457909064)) < 1e-12);

  for (int n = 0; n <= 12; ++n) {
    for (double x = 0.1; x <= 50.0; x += 0.53) {
      const double h = 1e-5 * std::max(1.0, x);
      const double fd = (spherical_bessel_j(n, x + h) - spherical_bessel_j(n, x - h)) / (2 * h);
      const double d = spherical_bessel_j_prime(n, x);
      CHECK(std::abs(d - fd) <= 1e-7 * std::max(std::abs(d), 1e-3));
      if (n >= 1) {
        const double ident = spherical_bessel_j(n - 1, x) - (n + 1.0) / x * spherical_bessel_j(n, x);
        CHECK(d == doctest::Approx(ident).epsilon(1e-10).scale(1.0));
      }
    }
  }
}

TEST_CASE("Neumann roots") {
  RootList r0 = bessel_prime_roots(0, 3, 1.0);
  REQUIRE(r0.roots.size() == 3);
  CHECK(r0.roots[0] == 0.0);
  CHECK(r0.roots[1] == doctest::Approx(4.493409).epsilon(1e-6));
  CHECK(r0.roots[2] == doctest::Approx(7.725252).epsilon(1e-6));

  RootList r1 = bessel_prime_roots(1, 1, 1.0);
  REQUIRE(r1.roots.size() == 1);
  CHECK(r1.roots[0] == doctest::Approx(2.081576).epsilon(1e-6));

  RootList r2 = bessel_prime_roots(0, 2, 2.0);
  CHECK(r2.roots[0] == 0.0);
  CHECK(r2.roots[1] == doctest::Approx(2.2467045).epsilon(1e-6));
}

TEST_CASE("root certification and ordering") {
  const double tol = kRootTolerance;
  for (int n = 0; n <= 15; ++n) {
    RootList rl = bessel_prime_roots(n, 12, 1.0);
    REQUIRE(rl.roots.size() == 12);
    for (std::size_t i = 0; i < rl.roots.size(); ++i) {
      const double k = rl.roots[i];
      if (i > 0) CHECK(k > rl.roots[i - 1]);
      if (k == 0.0) {
        CHECK(n == 0);
        CHECK(i == 0);
        continue;
      }
      const double d = 10 * tol;
      CHECK(spherical_bessel_j_prime(n, k - d) * spherical_bessel_j_prime(n, k + d) <= 0.0);
    }
    if (n >= 1) CHECK(rl.roots[0] > 0.0);
  }
}

TEST_CASE("roots up to a cutoff match counted roots") {
  for (int n = 0; n <= 6; ++n) {
    RootList upto = bessel_prime_roots_upto(n, 30.0, 1.5);
    RootList counted = bessel_prime_roots(n, static_cast<int>(upto.roots.size()) + 1, 1.5);
    for (std::size_t i = 0; i < upto.roots.size(); ++i) {
      CHECK(upto.roots[i] == doctest::Approx(counted.roots[i]).epsilon(1e-12));
      CHECK(upto.roots[i] <= 30.0);
    }
    CHECK(counted.roots.back() > 30.0);
  }
}

TEST_CASE("normalized Legendre agrees with the standard library") {
  for (int n = 0; n <= 20; ++n) {
    for (int m = 0; m <= n; ++m) {
      for (double th : {0.0, 0.1, 0.7, pi / 2, 2.3, pi}) {
        const double ref = std::sph_legendre(static_cast<unsigned>(n), static_cast<unsigned>(m), th);
        CHECK(normalized_legendre(n, m, std::cos(th)) == doctest::Approx(ref).epsilon(1e-12).scale(1.0));
      }
    }
  }
  auto col = normalized_legendre_column(2, 9, 0.3);
  REQUIRE(col.size() == 8);
  for (int l = 2; l <= 9; ++l) CHECK(col[l - 2] == doctest::Approx(normalized_legendre(l, 2, 0.3)));
}

TEST_CASE("spherical harmonic examples") {
  CHECK(spherical_harmonic(0, 0, 0.3, -2.0).real() == doctest::Approx(0.2820948).epsilon(1e-7));
  CHECK(std::abs(spherical_harmonic(1, 0, pi / 2, 0.0)) < 1e-16);
  CHECK_THROWS_AS(spherical_harmonic(1, 2, 0.1, 0.1), std::domain_error);
  // Condon-Shortley: Y_1^1 = -sqrt(3/8pi) sin(theta) e^{i phi}
  auto y11 = spherical_harmonic(1, 1, pi / 3, 0.4);
  const double a = -std::sqrt(3.0 / (8 * pi)) * std::sin(pi / 3);
  CHECK(y11.real() == doctest::Approx(a * std::cos(0.4)).epsilon(1e-14));
  CHECK(y11.imag() == doctest::Approx(a * std::sin(0.4)).epsilon(1e-14));
  // negative degree symmetry
  auto yp = spherical_harmonic(4, 3, 1.1, 0.7);
  auto ym = spherical_harmonic(4, -3, 1.1, 0.7);
  CHECK(ym.real() == doctest::Approx(-yp.real()).epsilon(1e-14));
  CHECK(ym.imag() == doctest::Approx(yp.imag()).epsilon(1e-14));
}

TEST_CASE("spherical harmonic orthonormality") {
  // Gauss-Legendre in cos(theta) is exact for the polynomial parts; the
  // uniform trapezoid in phi is exact for |m - m'| < 2 * points.
  const QuadratureRule gl = gauss_legendre(24, -1.0, 1.0);
  const int nphi = 24;
  for (int n = 0; n <= 8; ++n)
    for (int m = -n; m <= n; ++m)
      for (int n2 = 0; n2 <= 8; ++n2)
        for (int m2 = -n2; m2 <= n2; ++m2) {
          std::complex<double> acc = 0.0;
          for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
            const double th = std::acos(gl.nodes[i]);
            for (int j = 0; j < nphi; ++j) {
              const double ph = -pi + 2 * pi * j / nphi;
              acc += gl.weights[i] * (2 * pi / nphi) * spherical_harmonic(n, m, th, ph) *
                     std::conj(spherical_harmonic(n2, m2, th, ph));
            }
          }
          const double expect = (n == n2 && m == m2) ? 1.0 : 0.0;
          CHECK(std::abs(acc - expect) < 1e-8);
        }
}

TEST_CASE("theta derivative") {
  CHECK(std::abs(spherical_harmonic_dtheta(0, 0, 0.4, 1.0)) == 0.0);
  CHECK(spherical_harmonic_dtheta(1, 0, pi / 2, 0.0).real() ==
        doctest::Approx(-std::sqrt(3.0 / (4 * pi))).epsilon(1e-12));

  for (int n = 0; n <= 7; ++n)
    for (int m = -n; m <= n; ++m)
      for (double th : {0.2, 0.9, 1.6, 2.5}) {
        const double h = 1e-5;
        auto fd = (spherical_harmonic(n, m, th + h, 0.8) - spherical_harmonic(n, m, th - h, 0.8)) / (2 * h);
        auto d = spherical_harmonic_dtheta(n, m, th, 0.8);
        CHECK(std::abs(d - fd) <= 1e-6 * std::max(std::abs(d), 1.0));
      }

  // Pole limit for |m| = 1 is finite and matches one-sided differences.
  auto d0 = spherical_harmonic_dtheta(1, 1, 0.0, 0.0);
  const double h = 1e-6;
  auto fd0 = (spherical_harmonic(1, 1, 2 * h, 0.0) - spherical_harmonic(1, 1, h, 0.0)) / h;
  CHECK(std::isfinite(d0.real()));
  CHECK(std::abs(d0 - fd0) < 1e-5);
  CHECK(d0.real() == doctest::Approx(-std::sqrt(3.0 / (8 * pi))).epsilon(1e-12));
}

TEST_CASE("harmonic over sine") {
  for (int n = 1; n <= 6; ++n)
    for (int m = -n; m <= n; ++m) {
      if (m == 0) continue;
      auto v = spherical_harmonic_over_sin(n, m, 0.7, 0.3);
      auto ref = spherical_harmonic(n, m, 0.7, 0.3) / std::sin(0.7);
      CHECK(std::abs(v - ref) < 1e-12);
      auto pole = spherical_harmonic_over_sin(n, m, 0.0, 0.3);
      auto near = spherical_harmonic(n, m, 1e-7, 0.3) / std::sin(1e-7);
      CHECK(std::abs(pole - near) < 1e-6);
      if (std::abs(m) >= 2) CHECK(std::abs(pole) == 0.0);
    }
}

TEST_CASE("Gauss-Legendre and adaptive quadrature") {
  QuadratureRule r = gauss_legendre(10, 0.0, 2.0);
  double s = 0;
  for (std::size_t i = 0; i < r.nodes.size(); ++i) s += r.weights[i] * std::pow(r.nodes[i], 19);
  CHECK(s == doctest::Approx(std::pow(2.0, 20) / 20).epsilon(1e-13));
  CHECK(integrate_adaptive([](double x) { return std::exp(-x) * std::sin(5 * x); }, 0.0, 10.0) ==
        doctest::Approx((5.0 - std::exp(-10.0) * (std::sin(50.0) + 5 * std::cos(50.0))) / 26.0).epsilon(1e-12));
}
