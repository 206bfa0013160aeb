#pragma once

#include <string>

#include "stfem/problem.hpp"

namespace stfem {

/// Builds a constant-nu (nu = 1) problem on the unit cylinder whose data are derived from
/// an exact solution u: f = dt u - Laplace_x u, Dirichlet and initial traces = u.
/// `u.second` must be provided.
ProblemSpec manufactured_problem(const DomainSpec& domain, AnalyticFunction u, std::string name);

/// u = sin(pi x_1) ... sin(pi x_d) t^2 on (0,1)^d x (0,1).
ProblemSpec smooth_problem(int spatial_dim);

/// Slit geometry variants: the literal unit square with the slit on its bottom edge, or
/// (-1,1)^2 cut along [0,1] x {0}.
enum class SlitGeometry { unit_square, classical };

/// u = t r^alpha sin(alpha phi) in polar coordinates about the origin, nu = 1.
ProblemSpec slit_problem(SlitGeometry geometry = SlitGeometry::unit_square, double alpha = 0.5);

/// u = sin(pi x) t^3 on (0,1) x (0,1); smooth, used for directional rate studies.
ProblemSpec anisotropic_problem();

/// u = t x (1 - x) on (0,1) x (0,1); lies in the p >= 2 space along x and p >= 1 along t.
ProblemSpec quadratic_in_space_problem();

}  // namespace stfem
