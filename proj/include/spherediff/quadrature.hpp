#pragma once

#include <functional>
#include <vector>

namespace spherediff {

/// Gauss-Legendre rule mapped to [a, b].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule of the given order on [a, b]. Nodes come from Newton
/// iteration on P_order, accurate to a few ulps for orders up to a few
/// thousand.
QuadratureRule gauss_legendre(int order, double a, double b);

/// Adaptive Gauss-Kronrod integral of f over [a, b] to the given relative
/// tolerance.
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double rel_tol = 1e-12);

}  // namespace spherediff
