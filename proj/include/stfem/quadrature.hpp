#pragma once

#include <vector>

#include "stfem/common.hpp"

namespace stfem {

/// Gauss-Legendre rule with n points on [0, 1]; exact for polynomials of degree <= 2n-1.
struct QuadratureRule1D {
  std::vector<double> points;
  std::vector<double> weights;
};

QuadratureRule1D gauss_legendre(int n);

/// Tensor Gauss-Legendre rule on the reference brick [0,1]^dim with q points per axis.
/// Points are stored with axis 0 varying fastest.
struct QuadratureRule {
  int dim = 0;
  int order = 0;
  std::vector<Point> points;
  std::vector<double> weights;

  int size() const { return static_cast<int>(weights.size()); }
};

QuadratureRule tensor_rule(int dim, int points_per_axis);

/// Composite tensor rule: each axis split into `pieces` equal parts, q points per part.
QuadratureRule composite_rule(int dim, int points_per_axis, int pieces);

}  // namespace stfem
