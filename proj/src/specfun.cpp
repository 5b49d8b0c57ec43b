#include "spherediff/specfun.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

#include "spherediff/errors.hpp"

namespace spherediff {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSeriesLimit = 0.5;

void check_bessel_args(int n, double x, const char* who) {
  if (n < 0) throw std::domain_error(std::string(who) + ": negative order");
  if (!std::isfinite(x)) throw std::domain_error(std::string(who) + ": non-finite argument");
  if (x < 0.0) throw std::domain_error(std::string(who) + ": negative argument");
}

// j_n(x) = x^n / (2n+1)!! * sum_k (-x^2/2)^k / (k! (2n+3)(2n+5)...(2n+2k+1))
double bessel_series(int n, double x) {
  double prefactor = 1.0;
  for (int i = 1; i <= n; ++i) prefactor *= x / (2.0 * i + 1.0);
  const double half_x2 = 0.5 * x * x;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 60; ++k) {
    term *= -half_x2 / (k * (2.0 * n + 2.0 * k + 1.0));
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return prefactor * sum;
}

double bessel_j0(double x) { return std::sin(x) / x; }

double bessel_j1(double x) { return (std::sin(x) / x - std::cos(x)) / x; }

double bessel_j2(double x) {
  const double s = std::sin(x);
  const double c = std::cos(x);
  return (3.0 / (x * x) - 1.0) * s / x - 3.0 * c / (x * x);
}

double bessel_upward(int n, double x) {
  double prev = bessel_j0(x);
  double curr = bessel_j1(x);
  for (int l = 1; l < n; ++l) {
    const double next = (2.0 * l + 1.0) / x * curr - prev;
    prev = curr;
    curr = next;
  }
  return curr;
}

// Miller's algorithm: recur downward from far above n, normalize against
// whichever of j_0, j_1 is better conditioned at x.
double bessel_downward(int n, double x) {
  const int start = n + 20 + static_cast<int>(std::sqrt(40.0 * (n + 1)));
  double upper = 0.0;
  double curr = 1e-30;
  double at_n = 0.0;
  double j1_rec = 0.0;
  for (int l = start; l > 0; --l) {
    const double lower = (2.0 * l + 1.0) / x * curr - upper;
    upper = curr;
    curr = lower;  // now holds j_{l-1}
    if (l - 1 == n) at_n = curr;
    if (l - 1 == 1) j1_rec = curr;
    if (std::abs(curr) > 1e250) {
      curr *= 1e-250;
      upper *= 1e-250;
      at_n *= 1e-250;
      j1_rec *= 1e-250;
    }
  }
  const double j0_true = bessel_j0(x);
  const double j1_true = bessel_j1(x);
  const double scale = std::abs(j0_true) > std::abs(j1_true) ? j0_true / curr : j1_true / j1_rec;
  return at_n * scale;
}

double legendre_mm(int m, double sin_theta) {
  double p = std::sqrt(1.0 / (4.0 * kPi));
  for (int i = 1; i <= m; ++i) p *= -std::sqrt((2.0 * i + 1.0) / (2.0 * i)) * sin_theta;
  return p;
}

void check_harmonic_args(int n, int m) {
  if (n < 0) throw std::domain_error("spherical_harmonic: negative order");
  if (std::abs(m) > n) throw std::domain_error("spherical_harmonic: |m| > n");
}

}  // namespace

double spherical_bessel_j(int n, double x) {
  check_bessel_args(n, x, "spherical_bessel_j");
  if (x == 0.0) return n == 0 ? 1.0 : 0.0;
  if (x < kSeriesLimit) return bessel_series(n, x);
  switch (n) {
    case 0:
      return bessel_j0(x);
    case 1:
      return bessel_j1(x);
    case 2:
      return bessel_j2(x);
    default:
      break;
  }
  return x > n ? bessel_upward(n, x) : bessel_downward(n, x);
}

double spherical_bessel_j_prime(int n, double x) {
  check_bessel_args(n, x, "spherical_bessel_j_prime");
  if (n == 0) return -spherical_bessel_j(1, x);
  return (n * spherical_bessel_j(n - 1, x) - (n + 1) * spherical_bessel_j(n + 1, x)) / (2.0 * n + 1.0);
}

namespace {

std::vector<double> scan_roots(int n, double u_max, int max_count) {
  std::vector<double> roots;
  if (n == 0) roots.push_back(0.0);
  auto f = [n](double u) { return spherical_bessel_j_prime(n, u); };
  double a = 1e-3;
  double fa = f(a);
  while (a < u_max && static_cast<int>(roots.size()) < max_count) {
    const double b = std::min(a + kRootScanStep, u_max);
    const double fb = f(b);
    if (fa != 0.0 && fb != 0.0 && std::signbit(fa) != std::signbit(fb)) {
      double lo = a;
      double hi = b;
      double flo = fa;
      while (hi - lo > kRootTolerance) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0) {
          lo = hi = mid;
          break;
        }
        if (std::signbit(fm) == std::signbit(flo)) {
          lo = mid;
          flo = fm;
        } else {
          hi = mid;
        }
      }
      roots.push_back(0.5 * (lo + hi));
    }
    a = b;
    if (fb != 0.0) fa = fb;
  }
  return roots;
}

void check_root_args(int n, double R0) {
  if (n < 0) throw std::domain_error("bessel_prime_roots: negative order");
  if (!(R0 > 0.0)) throw std::domain_error("bessel_prime_roots: radius must be positive");
}

}  // namespace

RootList bessel_prime_roots(int n, int count, double R0) {
  check_root_args(n, R0);
  if (count < 1) throw std::domain_error("bessel_prime_roots: count must be >= 1");
  const double u_max = n + 10.0 + (count + 1.0) * kPi;
  std::vector<double> u = scan_roots(n, u_max, count);
  if (static_cast<int>(u.size()) < count) {
    std::ostringstream msg;
    msg << "bessel_prime_roots: found " << u.size() << " of " << count << " roots for n = " << n
        << " while scanning k*R0 in (0, " << u_max << "]";
    throw NumericalError(msg.str());
  }
  RootList out{n, R0, {}};
  out.roots.reserve(u.size());
  for (double v : u) out.roots.push_back(v / R0);
  return out;
}

RootList bessel_prime_roots_upto(int n, double k_max, double R0) {
  check_root_args(n, R0);
  RootList out{n, R0, {}};
  if (k_max < 0.0) return out;
  for (double v : scan_roots(n, k_max * R0, std::numeric_limits<int>::max())) out.roots.push_back(v / R0);
  return out;
}

namespace {

// Column recurrence with the sine supplied by the caller, so that angles
// near the poles keep full relative accuracy.
std::vector<double> legendre_column(int m, int lmax, double x, double s) {
  std::vector<double> out(lmax - m + 1);
  double p_prev = legendre_mm(m, s);
  out[0] = p_prev;
  if (lmax == m) return out;
  double p_curr = std::sqrt(2.0 * m + 3.0) * x * p_prev;
  out[1] = p_curr;
  for (int l = m + 2; l <= lmax; ++l) {
    const double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - static_cast<double>(m) * m));
    const double b = std::sqrt(((l - 1.0) * (l - 1.0) - static_cast<double>(m) * m) / (4.0 * (l - 1.0) * (l - 1.0) - 1.0));
    const double p_next = a * (x * p_curr - b * p_prev);
    p_prev = p_curr;
    p_curr = p_next;
    out[l - m] = p_curr;
  }
  return out;
}

}  // namespace

std::vector<double> normalized_legendre_column(int m, int lmax, double x) {
  if (m < 0 || lmax < m) throw std::domain_error("normalized_legendre_column: need 0 <= m <= lmax");
  return legendre_column(m, lmax, x, std::sqrt(std::max(0.0, (1.0 - x) * (1.0 + x))));
}

double normalized_legendre(int n, int m, double x) {
  if (m < 0 || m > n) throw std::domain_error("normalized_legendre: need 0 <= m <= n");
  return normalized_legendre_column(m, n, x).back();
}

std::complex<double> spherical_harmonic(int n, int m, double theta, double phi) {
  check_harmonic_args(n, m);
  const int am = std::abs(m);
  const double p = legendre_column(am, n, std::cos(theta), std::abs(std::sin(theta))).back();
  const std::complex<double> y = p * std::polar(1.0, am * phi);
  if (m >= 0) return y;
  return (am % 2 == 0 ? 1.0 : -1.0) * std::conj(y);
}

std::complex<double> spherical_harmonic_dtheta(int n, int m, double theta, double phi) {
  check_harmonic_args(n, m);
  std::complex<double> out{0.0, 0.0};
  if (m + 1 <= n) {
    out += std::sqrt(static_cast<double>(n - m) * (n + m + 1)) * std::polar(1.0, -phi) *
           spherical_harmonic(n, m + 1, theta, phi);
  }
  if (m - 1 >= -n) {
    out -= std::sqrt(static_cast<double>(n + m) * (n - m + 1)) * std::polar(1.0, phi) *
           spherical_harmonic(n, m - 1, theta, phi);
  }
  return 0.5 * out;
}

std::complex<double> spherical_harmonic_over_sin(int n, int m, double theta, double phi) {
  check_harmonic_args(n, m);
  const double s = std::sin(theta);
  if (s > 1e-8) return spherical_harmonic(n, m, theta, phi) / s;
  const int am = std::abs(m);
  if (am != 1) return {0.0, 0.0};
  // P_n^1(cos t) / sin t -> -P_n'(+-1); P_n'(1) = n(n+1)/2, P_n'(-1) = (-1)^{n+1} n(n+1)/2.
  const double c = std::sqrt((2.0 * n + 1.0) / (4.0 * kPi * n * (n + 1.0)));
  const double dp = 0.5 * n * (n + 1.0) * (std::cos(theta) > 0.0 ? 1.0 : ((n + 1) % 2 == 0 ? 1.0 : -1.0));
  const std::complex<double> y1 = -c * dp * std::polar(1.0, phi);
  return m > 0 ? y1 : -std::conj(y1);
}

}  // namespace spherediff
