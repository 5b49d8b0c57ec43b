#include "spherediff/boundary.hpp"

#include <cmath>
#include <map>
#include <numbers>

#include "spherediff/errors.hpp"
#include "spherediff/quadrature.hpp"
#include "spherediff/specfun.hpp"

namespace spherediff {

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::MatrixXd cap_overlap_with_order(int m, int n_max, double x0, int order) {
  const QuadratureRule rule = gauss_legendre(order, x0, 1.0);
  const int len = n_max - m + 1;
  Eigen::MatrixXd P(len, order);
  for (int q = 0; q < order; ++q) {
    const std::vector<double> col = normalized_legendre_column(m, n_max, rule.nodes[q]);
    for (int l = 0; l < len; ++l) P(l, q) = col[l];
  }
  const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(rule.weights.data(), order);
  return 2.0 * kPi * P * w.asDiagonal() * P.transpose();
}

}  // namespace

void validate_region(const BoundaryRegion& region) {
  if (region.kind == BoundaryRegion::Kind::cap && !(region.theta0 > 0.0 && region.theta0 <= kPi)) {
    throw ConfigError("region.theta0: must lie in (0, pi]");
  }
}

Eigen::MatrixXd cap_overlap(int m, int n_max, double theta0) {
  m = std::abs(m);
  if (n_max < m) return Eigen::MatrixXd(0, 0);
  const double x0 = std::cos(theta0);
  int order = kCapQuadratureOrder;
  Eigen::MatrixXd prev = cap_overlap_with_order(m, n_max, x0, order);
  for (;;) {
    order *= 2;
    Eigen::MatrixXd next = cap_overlap_with_order(m, n_max, x0, order);
    const double change = (next - prev).cwiseAbs().maxCoeff();
    prev = std::move(next);
    if (change <= kCapQuadratureTol) return prev;
    if (order > 16384) throw NumericalError("cap_overlap: quadrature did not converge");
  }
}

FeedbackMatrix build_feedback_matrix(const ModeSet& ms, const BoundaryRegion& region) {
  validate_region(region);
  const double R0 = ms.radius();
  const auto jR = ms.boundary_values();
  const auto modes = ms.modes();
  std::vector<MatrixBlock> blocks;

  if (region.kind == BoundaryRegion::Kind::full) {
    // Harmonic orthonormality leaves an outer product per (n, m) that does
    // not depend on m.
    std::map<int, std::shared_ptr<const Eigen::MatrixXd>> by_order;
    for (ModeBlock& mb : ms.blocks_by_order_degree()) {
      auto& values = by_order[mb.n];
      if (!values) {
        const auto len = static_cast<Eigen::Index>(mb.modes.size());
        Eigen::VectorXd b(len), c(len);
        for (Eigen::Index i = 0; i < len; ++i) {
          const int mu = mb.modes[i];
          b[i] = R0 * R0 * jR[mu];
          c[i] = jR[mu] / modes[mu].N;
        }
        values = std::make_shared<const Eigen::MatrixXd>(b * c.transpose());
      }
      blocks.push_back({mb.n, mb.m, std::move(mb.modes), values});
    }
  } else {
    for (ModeBlock& mb : ms.blocks_by_degree()) {
      const int am = std::abs(mb.m);
      int n_max = am;
      for (int mu : mb.modes) n_max = std::max(n_max, modes[mu].n);
      const Eigen::MatrixXd G = cap_overlap(am, n_max, region.theta0);
      const auto len = static_cast<Eigen::Index>(mb.modes.size());
      auto values = std::make_shared<Eigen::MatrixXd>(len, len);
      for (Eigen::Index i = 0; i < len; ++i) {
        const ModeIndex& a = modes[mb.modes[i]];
        for (Eigen::Index j = 0; j < len; ++j) {
          const ModeIndex& b = modes[mb.modes[j]];
          (*values)(i, j) = R0 * R0 * jR[a.mu] * jR[b.mu] / b.N * G(a.n - am, b.n - am);
        }
      }
      blocks.push_back({-1, mb.m, std::move(mb.modes), std::move(values)});
    }
  }
  return {BlockMatrix(ms.size(), std::move(blocks)), region, ms.id()};
}

ConnectionMatrix build_connection_matrix(const ModeSet& ms_s1, const ModeSet& ms_s2, double theta0, double gamma_s1,
                                         double gamma_s2) {
  if (ms_s1.radius() != ms_s2.radius() || ms_s1.diffusion() != ms_s2.diffusion() ||
      ms_s1.requested() != ms_s2.requested()) {
    throw ConfigError("network: both spheres need identical R0, D and Q");
  }
  if (!(gamma_s1 >= 0.0)) throw ConfigError("network.gamma_s1: must be non-negative");
  if (!(gamma_s2 >= 0.0)) throw ConfigError("network.gamma_s2: must be non-negative");
  if (!(theta0 > 0.0 && theta0 <= kPi)) throw ConfigError("network.theta0: must lie in (0, pi]");
  const FeedbackMatrix cap = build_feedback_matrix(ms_s1, BoundaryRegion::polar_cap(theta0));
  return {cap.matrix.scaled(-gamma_s1 * gamma_s2), theta0, gamma_s1, gamma_s2};
}

}  // namespace spherediff
