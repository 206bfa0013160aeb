#include "stfem/problems.hpp"

#include <cmath>
#include <numbers>

namespace stfem {

ProblemSpec manufactured_problem(const DomainSpec& domain, AnalyticFunction u, std::string name) {
  require(u.value && u.gradient && u.second, ErrorKind::invalid_argument,
          "manufactured solution needs value, gradient and second derivatives");
  ProblemSpec p;
  p.name = std::move(name);
  p.domain = domain;
  p.nu = Coefficient::constant(1.0);
  p.nu_min = 1.0;
  const int ta = domain.time_axis();
  p.source = [u, ta](const Point& x) {
    const Point g = u.gradient(x);
    const Point s = u.second(x);
    double lap = 0.0;
    for (int a = 0; a < ta; ++a) lap += s[a];
    return g[ta] - lap;
  };
  p.dirichlet = u.value;
  p.initial = u.value;
  p.exact = std::move(u);
  return p;
}

ProblemSpec smooth_problem(int spatial_dim) {
  require(spatial_dim == 1 || spatial_dim == 2, ErrorKind::invalid_argument,
          "smooth problem supports d = 1 or 2");
  const int d = spatial_dim;
  constexpr double pi = std::numbers::pi;
  AnalyticFunction u;
  u.value = [d](const Point& x) {
    double s = x[d] * x[d];
    for (int a = 0; a < d; ++a) s *= std::sin(pi * x[a]);
    return s;
  };
  u.gradient = [d](const Point& x) {
    Point g{};
    double prod = 1.0;
    for (int a = 0; a < d; ++a) prod *= std::sin(pi * x[a]);
    for (int a = 0; a < d; ++a) {
      double other = 1.0;
      for (int b = 0; b < d; ++b) {
        if (b != a) other *= std::sin(pi * x[b]);
      }
      g[a] = x[d] * x[d] * pi * std::cos(pi * x[a]) * other;
    }
    g[d] = 2.0 * x[d] * prod;
    return g;
  };
  u.second = [d](const Point& x) {
    Point s{};
    double prod = 1.0;
    for (int a = 0; a < d; ++a) prod *= std::sin(pi * x[a]);
    for (int a = 0; a < d; ++a) s[a] = -pi * pi * x[d] * x[d] * prod;
    s[d] = 2.0 * prod;
    return s;
  };
  ProblemSpec p = manufactured_problem(DomainSpec::unit_cylinder(d), std::move(u),
                                       "smooth-d" + std::to_string(d));
  // Closed form of dt u - Laplace u, exact at quadrature points.
  p.source = [d](const Point& x) {
    double prod = 1.0;
    for (int a = 0; a < d; ++a) prod *= std::sin(pi * x[a]);
    return 2.0 * x[d] * prod + d * pi * pi * x[d] * x[d] * prod;
  };
  p.dirichlet = nullptr;
  p.initial = nullptr;
  return p;
}

namespace {

// Polar angle about the origin in [0, 2 pi).
double polar_angle(double x, double y) {
  double phi = std::atan2(y, x);
  if (phi < 0.0) phi += 2.0 * std::numbers::pi;
  return phi;
}

}  // namespace

ProblemSpec slit_problem(SlitGeometry geometry, double alpha) {
  ProblemSpec p;
  p.name = geometry == SlitGeometry::unit_square ? "slit-unit-square" : "slit-classical";
  DomainSpec dom;
  dom.dim = 3;
  if (geometry == SlitGeometry::unit_square) {
    dom.lower = {0.0, 0.0, 0.0};
    dom.upper = {1.0, 1.0, 1.0};
  } else {
    dom.lower = {-1.0, -1.0, 0.0};
    dom.upper = {1.0, 1.0, 1.0};
  }
  dom.slit = SlitFacet{1, 0.0, 0, 0.0, 1.0};
  p.domain = dom;
  p.nu = Coefficient::constant(1.0);
  p.nu_min = 1.0;

  AnalyticFunction u;
  u.value = [alpha](const Point& x) {
    const double r = std::hypot(x[0], x[1]);
    if (r == 0.0) return 0.0;
    return x[2] * std::pow(r, alpha) * std::sin(alpha * polar_angle(x[0], x[1]));
  };
  u.gradient = [alpha](const Point& x) {
    const double r = std::hypot(x[0], x[1]);
    Point g{};
    if (r == 0.0) return g;
    const double phi = polar_angle(x[0], x[1]);
    const double c = x[2] * alpha * std::pow(r, alpha - 1.0);
    g[0] = c * std::sin((alpha - 1.0) * phi);
    g[1] = c * std::cos((alpha - 1.0) * phi);
    g[2] = std::pow(r, alpha) * std::sin(alpha * phi);
    return g;
  };
  u.second = [alpha](const Point& x) {
    const double r = std::hypot(x[0], x[1]);
    Point s{};
    if (r == 0.0) return s;
    const double phi = polar_angle(x[0], x[1]);
    // d/dx of t alpha r^(alpha-1) sin((alpha-1) phi) is t alpha (alpha-1) r^(alpha-2) sin((alpha-2) phi).
    const double c = x[2] * alpha * (alpha - 1.0) * std::pow(r, alpha - 2.0);
    s[0] = c * std::sin((alpha - 2.0) * phi);
    s[1] = -s[0];
    return s;
  };
  p.source = [alpha](const Point& x) {
    const double r = std::hypot(x[0], x[1]);
    if (r == 0.0) return 0.0;
    return std::pow(r, alpha) * std::sin(alpha * polar_angle(x[0], x[1]));
  };
  p.dirichlet = u.value;
  p.initial = nullptr;
  p.exact = std::move(u);
  p.singular = [](const Brick& b) {
    for (int a = 0; a < 2; ++a) {
      if (b.anchor[a] > 0.0 || b.anchor[a] + b.sizes[a] < 0.0) return false;
    }
    return true;
  };
  return p;
}

ProblemSpec anisotropic_problem() {
  constexpr double pi = std::numbers::pi;
  AnalyticFunction u;
  u.value = [](const Point& x) { return std::sin(pi * x[0]) * x[1] * x[1] * x[1]; };
  u.gradient = [](const Point& x) {
    return Point{pi * std::cos(pi * x[0]) * x[1] * x[1] * x[1],
                 3.0 * std::sin(pi * x[0]) * x[1] * x[1], 0.0};
  };
  u.second = [](const Point& x) {
    return Point{-pi * pi * std::sin(pi * x[0]) * x[1] * x[1] * x[1],
                 6.0 * std::sin(pi * x[0]) * x[1], 0.0};
  };
  ProblemSpec p = manufactured_problem(DomainSpec::unit_cylinder(1), std::move(u), "sin-x-t3");
  p.dirichlet = nullptr;
  p.initial = nullptr;
  return p;
}

ProblemSpec quadratic_in_space_problem() {
  AnalyticFunction u;
  u.value = [](const Point& x) { return x[1] * x[0] * (1.0 - x[0]); };
  u.gradient = [](const Point& x) {
    return Point{x[1] * (1.0 - 2.0 * x[0]), x[0] * (1.0 - x[0]), 0.0};
  };
  u.second = [](const Point& x) { return Point{-2.0 * x[1], 0.0, 0.0}; };
  ProblemSpec p = manufactured_problem(DomainSpec::unit_cylinder(1), std::move(u), "t-x-1mx");
  p.dirichlet = nullptr;
  p.initial = nullptr;
  return p;
}

}  // namespace stfem
