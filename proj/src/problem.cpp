#include "stfem/problem.hpp"

#include <cmath>
#include <numbers>

namespace stfem {

BoundaryDataSpec ProblemSpec::boundary_data() const {
  if (!dirichlet && !initial) return {};
  const int ta = domain.time_axis();
  const double t0 = domain.lower[ta];
  return {[dirichlet = dirichlet, initial = initial, ta, t0](const Point& x) {
    if (x[ta] <= t0) return initial ? initial(x) : 0.0;
    return dirichlet ? dirichlet(x) : 0.0;
  }};
}

double ProblemSpec::friedrichs_constant() const {
  double s = 0.0;
  for (int a = 0; a < spatial_dim(); ++a) {
    const double l = domain.upper[a] - domain.lower[a];
    s += 1.0 / (l * l);
  }
  return 1.0 / (std::numbers::pi * std::sqrt(s) * std::sqrt(nu_min));
}

}  // namespace stfem
