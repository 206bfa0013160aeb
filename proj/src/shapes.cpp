#include "stfem/shapes.hpp"

#include <cmath>
#include <numbers>

#include "stfem/common.hpp"

namespace stfem {

namespace {

// Legendre P_n and its derivative at x in [-1, 1].
void legendre(int n, double x, double& p, double& dp) {
  double p0 = 1.0;
  double p1 = x;
  if (n == 0) {
    p = 1.0;
    dp = 0.0;
    return;
  }
  for (int k = 2; k <= n; ++k) {
    const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = pk;
  }
  p = p1;
  dp = n * (x * p1 - p0) / (x * x - 1.0);
}

}  // namespace

std::vector<double> gauss_lobatto_nodes(int degree) {
  require(degree >= 1, ErrorKind::invalid_argument, "polynomial degree must be >= 1");
  std::vector<double> x(degree + 1);
  x[0] = -1.0;
  x[degree] = 1.0;
  // Interior nodes are the roots of P'_p; Newton on (1 - x^2) P'_p with Chebyshev-Lobatto guesses.
  for (int i = 1; i < degree; ++i) {
    double xi = -std::cos(std::numbers::pi * i / degree);
    for (int it = 0; it < 100; ++it) {
      double p = 0.0;
      double dp = 0.0;
      legendre(degree, xi, p, dp);
      // d/dx[(1-x^2) P'] = -p(p+1) P
      const double f = (1.0 - xi * xi) * dp;
      const double df = -degree * (degree + 1.0) * p;
      const double step = f / df;
      xi -= step;
      if (std::abs(step) < 1e-16) break;
    }
    x[i] = xi;
  }
  for (double& v : x) v = 0.5 * (v + 1.0);
  x[0] = 0.0;
  x[degree] = 1.0;
  return x;
}

ShapeSet::ShapeSet(int degree) : p_(degree), nodes_(gauss_lobatto_nodes(degree)) {
  denom_.resize(p_ + 1);
  for (int i = 0; i <= p_; ++i) {
    double d = 1.0;
    for (int j = 0; j <= p_; ++j) {
      if (j != i) d *= nodes_[i] - nodes_[j];
    }
    denom_[i] = d;
  }
}

void ShapeSet::eval(double s, double* value, double* d1, double* d2) const {
  const int n = p_ + 1;
  double diff[16];
  for (int j = 0; j < n; ++j) diff[j] = s - nodes_[j];
  for (int i = 0; i < n; ++i) {
    // Product over j != i of (s - x_j), with its first two derivatives.
    double v = 1.0;
    double dv = 0.0;
    double ddv = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      ddv = ddv * diff[j] + 2.0 * dv;
      dv = dv * diff[j] + v;
      v *= diff[j];
    }
    if (value) value[i] = v / denom_[i];
    if (d1) d1[i] = dv / denom_[i];
    if (d2) d2[i] = ddv / denom_[i];
  }
}

}  // namespace stfem
