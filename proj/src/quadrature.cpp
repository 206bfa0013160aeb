#include "stfem/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

namespace stfem {

QuadratureRule1D gauss_legendre(int n) {
  require(n >= 1, ErrorKind::invalid_argument, "quadrature needs at least one point");
  QuadratureRule1D rule;
  rule.points.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      const double p = n == 1 ? x : p1;
      const double pm = n == 1 ? 1.0 : p0;
      dp = n * (x * p - pm) / (x * x - 1.0);
      const double step = p / dp;
      x -= step;
      if (std::abs(step) < 1e-16) break;
    }
    // Ascending order on [0, 1].
    rule.points[n - 1 - i] = 0.5 * (x + 1.0);
    rule.weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

QuadratureRule composite_rule(int dim, int points_per_axis, int pieces) {
  const QuadratureRule1D base = gauss_legendre(points_per_axis);
  QuadratureRule1D line;
  for (int k = 0; k < pieces; ++k) {
    for (int i = 0; i < points_per_axis; ++i) {
      line.points.push_back((k + base.points[i]) / pieces);
      line.weights.push_back(base.weights[i] / pieces);
    }
  }
  const int m = static_cast<int>(line.points.size());
  QuadratureRule rule;
  rule.dim = dim;
  rule.order = points_per_axis;
  int total = 1;
  for (int a = 0; a < dim; ++a) total *= m;
  rule.points.resize(total);
  rule.weights.resize(total);
  for (int q = 0; q < total; ++q) {
    int rem = q;
    Point x{};
    double w = 1.0;
    for (int a = 0; a < dim; ++a) {
      const int i = rem % m;
      rem /= m;
      x[a] = line.points[i];
      w *= line.weights[i];
    }
    rule.points[q] = x;
    rule.weights[q] = w;
  }
  return rule;
}

QuadratureRule tensor_rule(int dim, int points_per_axis) {
  return composite_rule(dim, points_per_axis, 1);
}

}  // namespace stfem
