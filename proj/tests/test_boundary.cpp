#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "doctest.h"
#include "spherediff/boundary.hpp"
#include "spherediff/errors.hpp"
#include "spherediff/quadrature.hpp"
#include "spherediff/specfun.hpp"

using namespace spherediff;
using std::numbers::pi;

namespace {

// Overlap of the harmonics over the cap from an independent theta rule:
// composite Simpson on the polar angle with std::sph_legendre.
double cap_overlap_oracle(int n, int n2, int m, double theta0) {
  const int steps = 4000;
  const double h = theta0 / steps;
  double s = 0;
  for (int i = 0; i <= steps; ++i) {
    const double th = i * h;
    const double w = (i == 0 || i == steps) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    s += w * std::sph_legendre(n, std::abs(m), th) * std::sph_legendre(n2, std::abs(m), th) * std::sin(th);
  }
  return 2 * pi * s * h / 3.0;
}

}  // namespace

TEST_CASE("full-sphere feedback entries") {
  ModeSet ms = ModeSet::enumerate(1.0, 0.01, 240);
  FeedbackMatrix fb = build_feedback_matrix(ms, BoundaryRegion::full_sphere());
  CHECK(fb.mode_set_id == ms.id());
  int m01 = -1;
  for (int mu = 0; mu < ms.size(); ++mu)
    if (ms[mu].n == 0 && ms[mu].nu == 1) m01 = mu;
  REQUIRE(m01 > 0);
  // R0^2 j_0(k)^2 / N with N = j_0(k)^2 / 2 for a Neumann root.
  const double j0 = std::sin(4.493409457909064) / 4.493409457909064;
  const double N = normalization_quadrature(0, 4.493409457909064, 1.0);
  CHECK(fb.matrix.coeff(m01, m01) == doctest::Approx(j0 * j0 / N).epsilon(1e-10));
  CHECK(fb.matrix.coeff(m01, m01) == doctest::Approx(2.0).epsilon(1e-9));
  // Constant mode: j_0(0) = 1, N = 1/3.
  CHECK(fb.matrix.coeff(0, 0) == doctest::Approx(3.0));

  for (int a = 0; a < ms.size(); ++a)
    for (int b = 0; b < ms.size(); ++b) {
      const ModeIndex& x = ms[a];
      const ModeIndex& y = ms[b];
      const double expect = (x.n == y.n && x.m == y.m)
                                ? std::sph_bessel(x.n, x.k) * std::sph_bessel(y.n, y.k) / y.N
                                : 0.0;
      CHECK(fb.matrix.coeff(a, b) == doctest::Approx(expect).epsilon(1e-9).scale(1e-12));
    }
}

TEST_CASE("full-sphere blocks have rank one") {
  ModeSet ms = ModeSet::enumerate(1.0, 0.01, 3000);
  FeedbackMatrix fb = build_feedback_matrix(ms, BoundaryRegion::full_sphere());
  for (const MatrixBlock& b : fb.matrix.blocks()) {
    if (b.values->rows() < 2) continue;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(*b.values);
    const auto& s = svd.singularValues();
    CHECK(s(1) < 1e-12 * s(0));
  }
}

TEST_CASE("cap feedback") {
  const double R0 = 1.3;
  ModeSet ms = ModeSet::enumerate(R0, 0.01, 400);
  FeedbackMatrix full = build_feedback_matrix(ms, BoundaryRegion::full_sphere());
  FeedbackMatrix whole = build_feedback_matrix(ms, BoundaryRegion::polar_cap(pi));
  CHECK((full.matrix.to_dense() - whole.matrix.to_dense()).cwiseAbs().maxCoeff() < 1e-8);

  const double theta0 = pi / 4;
  FeedbackMatrix cap = build_feedback_matrix(ms, BoundaryRegion::polar_cap(theta0));
  Eigen::MatrixXd dense = cap.matrix.to_dense();
  for (int a = 0; a < ms.size(); ++a)
    for (int b = 0; b < ms.size(); ++b) {
      const ModeIndex& x = ms[a];
      const ModeIndex& y = ms[b];
      if (x.m != y.m) {
        CHECK(dense(a, b) == 0.0);
        continue;
      }
      if (a % 7 != 0 && b % 11 != 0) continue;  // sample the oracle
      const double expect = R0 * R0 * std::sph_bessel(x.n, x.k * R0) * std::sph_bessel(y.n, y.k * R0) / y.N *
                            cap_overlap_oracle(x.n, y.n, x.m, theta0);
      CHECK(dense(a, b) == doctest::Approx(expect).epsilon(1e-8).scale(1e-10));
    }
  CHECK(dense.allFinite());
}

TEST_CASE("cap overlaps") {
  Eigen::MatrixXd g = cap_overlap(2, 10, 1.0);
  REQUIRE(g.rows() == 9);
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) CHECK(g(i, j) == doctest::Approx(cap_overlap_oracle(i + 2, j + 2, 2, 1.0)).epsilon(1e-9).scale(1e-12));
  CHECK((g - g.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  Eigen::MatrixXd all = cap_overlap(3, 12, pi);
  CHECK((all - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("cap diagonal grows monotonically toward the full sphere") {
  ModeSet ms = ModeSet::enumerate(1.0, 0.01, 240);
  std::vector<int> radial;
  for (int mu = 0; mu < ms.size(); ++mu)
    if (ms[mu].n == 0) radial.push_back(mu);
  Eigen::VectorXd prev = Eigen::VectorXd::Zero(static_cast<int>(radial.size()));
  for (double th = 0.2; th <= pi + 1e-12; th += 0.2) {
    const double theta0 = std::min(th, pi);
    FeedbackMatrix cap = build_feedback_matrix(ms, BoundaryRegion::polar_cap(theta0));
    for (std::size_t i = 0; i < radial.size(); ++i) {
      const double v = cap.matrix.coeff(radial[i], radial[i]);
      CHECK(v >= prev(static_cast<int>(i)));
      prev(static_cast<int>(i)) = v;
    }
  }
  FeedbackMatrix full = build_feedback_matrix(ms, BoundaryRegion::full_sphere());
  FeedbackMatrix last = build_feedback_matrix(ms, BoundaryRegion::polar_cap(pi));
  for (int mu : radial) CHECK(last.matrix.coeff(mu, mu) == doctest::Approx(full.matrix.coeff(mu, mu)).epsilon(1e-10));
}

TEST_CASE("region validation") {
  CHECK_NOTHROW(validate_region(BoundaryRegion::polar_cap(pi)));
  CHECK_THROWS_AS(validate_region(BoundaryRegion::polar_cap(0.0)), ConfigError);
  CHECK_THROWS_AS(validate_region(BoundaryRegion::polar_cap(3.2)), ConfigError);
  CHECK_THROWS_AS(validate_region(BoundaryRegion::polar_cap(std::nan(""))), ConfigError);
}

TEST_CASE("connection matrix") {
  ModeSet s1 = ModeSet::enumerate(1.0, 0.01, 300);
  ModeSet s2 = ModeSet::enumerate(1.0, 0.01, 300);
  ConnectionMatrix t = build_connection_matrix(s1, s2, pi / 4, 0.1, 1.0);
  ConnectionMatrix t2 = build_connection_matrix(s1, s2, pi / 4, 0.2, 1.0);
  ConnectionMatrix t3 = build_connection_matrix(s1, s2, pi / 4, 0.1, 0.5);
  Eigen::MatrixXd d = t.matrix.to_dense();
  CHECK((t2.matrix.to_dense() - 2.0 * d).cwiseAbs().maxCoeff() <= 1e-15 * d.cwiseAbs().maxCoeff());
  CHECK((t3.matrix.to_dense() - 0.5 * d).cwiseAbs().maxCoeff() <= 1e-15 * d.cwiseAbs().maxCoeff());
  CHECK(build_connection_matrix(s1, s2, pi / 4, 0.0, 1.0).matrix.to_dense().cwiseAbs().maxCoeff() == 0.0);
  CHECK(build_connection_matrix(s1, s2, pi / 4, 0.1, 0.0).matrix.to_dense().cwiseAbs().maxCoeff() == 0.0);
  for (int a = 0; a < s1.size(); ++a)
    for (int b = 0; b < s1.size(); ++b)
      if (s2[a].m != s1[b].m) CHECK(d(a, b) == 0.0);

  FeedbackMatrix cap = build_feedback_matrix(s1, BoundaryRegion::polar_cap(pi / 4));
  CHECK((d + 0.1 * cap.matrix.to_dense()).cwiseAbs().maxCoeff() < 1e-14);

  ConnectionMatrix whole = build_connection_matrix(s1, s2, pi, 0.3, 0.7);
  FeedbackMatrix full = build_feedback_matrix(s1, BoundaryRegion::full_sphere());
  CHECK((whole.matrix.to_dense() + 0.21 * full.matrix.to_dense()).cwiseAbs().maxCoeff() < 1e-8);

  CHECK_THROWS_AS(build_connection_matrix(s1, ModeSet::enumerate(1.1, 0.01, 300), pi / 4, 0.1, 1.0), ConfigError);
  CHECK_THROWS_AS(build_connection_matrix(s1, ModeSet::enumerate(1.0, 0.02, 300), pi / 4, 0.1, 1.0), ConfigError);
  CHECK_THROWS_AS(build_connection_matrix(s1, ModeSet::enumerate(1.0, 0.01, 301), pi / 4, 0.1, 1.0), ConfigError);
  CHECK_THROWS_AS(build_connection_matrix(s1, s2, 0.0, 0.1, 1.0), ConfigError);
  CHECK_THROWS_AS(build_connection_matrix(s1, s2, pi / 4, -0.1, 1.0), ConfigError);
}
