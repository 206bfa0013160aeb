#pragma once

#include <functional>
#include <optional>
#include <string>

#include "stfem/fespace.hpp"
#include "stfem/mesh.hpp"

namespace stfem {

using VectorFunction = std::function<Point(const Point&)>;

/// Diffusion coefficient nu(x, t) > 0. Without a callable it is the constant `constant_value`.
struct Coefficient {
  double constant_value = 1.0;
  ScalarFunction value;
  VectorFunction grad_x;  // spatial gradient, needed when nu varies

  bool is_constant() const { return !value; }
  double operator()(const Point& x) const { return value ? value(x) : constant_value; }
  Point gradient(const Point& x) const { return grad_x ? grad_x(x) : Point{}; }

  static Coefficient constant(double v) {
    Coefficient c;
    c.constant_value = v;
    return c;
  }
};

/// A smooth function with its derivatives: gradient over all axes (time last) and the
/// pure second derivatives d^2/dx_a^2 (only needed by norms involving div(nu grad)).
struct AnalyticFunction {
  ScalarFunction value;
  VectorFunction gradient;
  VectorFunction second;
};

/// Parabolic model problem dt u - div_x(nu grad_x u) = f on Q = Omega x (0, T).
struct ProblemSpec {
  std::string name;
  DomainSpec domain;
  Coefficient nu;
  double nu_min = 1.0;
  ScalarFunction source;
  ScalarFunction dirichlet;  // trace on Sigma; empty means zero
  ScalarFunction initial;    // trace on Sigma_0; empty means zero
  std::optional<AnalyticFunction> exact;
  /// Bricks that touch a solution singularity; they get raised quadrature.
  std::function<bool(const Brick&)> singular;

  int spatial_dim() const { return domain.spatial_dim(); }
  bool is_singular(const Brick& b) const { return singular && singular(b); }
  double f(const Point& x) const { return source ? source(x) : 0.0; }

  /// Combined essential data: initial trace on t = 0, Dirichlet trace elsewhere.
  BoundaryDataSpec boundary_data() const;

  /// Friedrichs constant of the spatial bounding box, scaled by 1/sqrt(nu_min).
  double friedrichs_constant() const;
};

}  // namespace stfem
