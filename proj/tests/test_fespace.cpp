#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "stfem/fespace.hpp"
#include "stfem/problems.hpp"
#include "stfem/quadrature.hpp"
#include "stfem/shapes.hpp"

using namespace stfem;

namespace {

std::shared_ptr<const BrickMesh> mesh_ptr(BrickMesh m) {
  return std::make_shared<const BrickMesh>(std::move(m));
}

std::shared_ptr<const BrickMesh> unit(int d, std::vector<int> cells) {
  return mesh_ptr(build_tensor_mesh(DomainSpec::unit_cylinder(d), cells));
}

// Randomly refined mesh with hanging nodes.
std::shared_ptr<const BrickMesh> random_mesh(int d, unsigned seed, int steps) {
  std::mt19937 rng(seed);
  BrickMesh m = build_tensor_mesh(DomainSpec::unit_cylinder(d), std::vector<int>(d + 1, 2));
  for (int s = 0; s < steps; ++s) {
    std::vector<RefinementDirective> dirs;
    for (int id : m.active()) {
      if (rng() % 3 == 0) dirs.push_back({id, 1u + static_cast<unsigned>(rng() % ((1u << (d + 1)) - 1))});
    }
    if (dirs.empty()) dirs.push_back({m.active()[0], 1u});
    m = refine(m, dirs);
  }
  return mesh_ptr(std::move(m));
}

double poly(const Point& x, int p) {
  double v = 1.0;
  for (int a = 0; a < 3; ++a) v += std::pow(x[a] + 0.3 * a, p) * (a + 1);
  return v;
}

}  // namespace

TEST_SUITE("shapes and quadrature") {

TEST_CASE("Gauss-Lobatto nodes") {
  CHECK(gauss_lobatto_nodes(1) == std::vector<double>{0.0, 1.0});
  const auto n2 = gauss_lobatto_nodes(2);
  REQUIRE(n2.size() == 3);
  CHECK(n2[1] == doctest::Approx(0.5));
  const auto n3 = gauss_lobatto_nodes(3);
  CHECK(n3[1] == doctest::Approx(0.5 - 0.5 / std::sqrt(5.0)));
  CHECK(n3[2] == doctest::Approx(0.5 + 0.5 / std::sqrt(5.0)));
}

TEST_CASE("Lagrange basis is nodal and sums to one") {
  for (int p = 1; p <= 3; ++p) {
    const ShapeSet s(p);
    std::vector<double> v(p + 1), d1(p + 1), d2(p + 1);
    for (int j = 0; j <= p; ++j) {
      s.eval(s.nodes()[j], v.data(), nullptr, nullptr);
      for (int i = 0; i <= p; ++i) CHECK(v[i] == doctest::Approx(i == j ? 1.0 : 0.0));
    }
    s.eval(0.37, v.data(), d1.data(), d2.data());
    double sv = 0.0, sd1 = 0.0, sd2 = 0.0, sx = 0.0;
    for (int i = 0; i <= p; ++i) {
      sv += v[i];
      sd1 += d1[i];
      sd2 += d2[i];
      sx += d1[i] * s.nodes()[i];
    }
    CHECK(sv == doctest::Approx(1.0));
    CHECK(sd1 == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sd2 == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(sx == doctest::Approx(1.0));  // derivative of the identity
  }
}

TEST_CASE("Gauss-Legendre exactness") {
  for (int n = 1; n <= 8; ++n) {
    const QuadratureRule1D r = gauss_legendre(n);
    for (int k = 0; k <= 2 * n - 1; ++k) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += r.weights[i] * std::pow(r.points[i], k);
      CHECK(s == doctest::Approx(1.0 / (k + 1)));
    }
  }
  const QuadratureRule t = tensor_rule(3, 3);
  CHECK(t.size() == 27);
  double s = 0.0;
  for (int q = 0; q < t.size(); ++q) {
    const Point& x = t.points[q];
    s += t.weights[q] * std::pow(x[0], 5) * std::pow(x[1], 4) * x[2];
  }
  CHECK(s == doctest::Approx(1.0 / 60.0));
  const QuadratureRule c = composite_rule(2, 2, 3);
  CHECK(c.size() == 36);
  double w = 0.0;
  for (double x : c.weights) w += x;
  CHECK(w == doctest::Approx(1.0));
}

}

TEST_SUITE("fespace") {

TEST_CASE("dof counts") {
  CHECK(build_space(unit(1, {1, 1}), 2).num_true() == 9);
  CHECK(build_space(unit(1, {2, 3}), 1).num_true() == 12);
  CHECK(build_space(unit(2, {2, 2, 2}), 3).num_true() == 7 * 7 * 7);
}

TEST_CASE("hanging node interpolates its two neighbours") {
  auto m0 = unit(1, {2, 1});
  const int left = m0->locate({0.25, 0.5, 0.0});
  const RefinementDirective dir{left, 0b10u};
  auto m = mesh_ptr(refine(*m0, std::span(&dir, 1)));
  const FeSpace s = build_space(m, 1);
  REQUIRE(s.num_hanging() == 1);
  for (int n = 0; n < s.num_nodes(); ++n) {
    if (!s.is_hanging(n)) continue;
    const Point& x = s.node_position(n);
    CHECK(x[0] == doctest::Approx(0.5));
    CHECK(x[1] == doctest::Approx(0.5));
    const auto c = s.constraint(n);
    REQUIRE(c.size() == 2);
    for (const ConstraintEntry& t : c) {
      CHECK(t.weight == doctest::Approx(0.5));
      CHECK(s.node_position(s.node_of_true(t.true_dof))[0] == doctest::Approx(0.5));
    }
  }
}

TEST_CASE("interpolation reproduces the polynomial space on irregular meshes") {
  for (int d = 1; d <= 2; ++d) {
    for (int p = 1; p <= 2; ++p) {
      auto m = random_mesh(d, 11 * d + p, 3);
      const FeSpace s = build_space(m, p);
      const auto u = interpolate(s, [p](const Point& x) { return poly(x, p); });
      const auto full = s.expand(u);
      std::mt19937 rng(3);
      std::uniform_real_distribution<double> U(0.0, 1.0);
      for (int k = 0; k < 50; ++k) {
        const Point x{U(rng), U(rng), d == 2 ? U(rng) : 0.0};
        CHECK(evaluate_at(s, full, x).value == doctest::Approx(poly(x, p)).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("functions stay continuous across hanging faces") {
  for (unsigned seed = 1; seed <= 10; ++seed) {
    const int d = 1 + seed % 2;
    auto m = random_mesh(d, seed, 3);
    const FeSpace s = build_space(m, 1 + seed % 3);
    std::mt19937 rng(seed);
    std::vector<double> u(s.num_true());
    for (double& x : u) x = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    const auto full = s.expand(u);
    std::vector<double> local(s.nodes_per_element());
    for (const Face& f : m->faces()) {
      const Brick master = m->brick(f.master);
      for (int sl : f.slaves) {
        const Brick slave = m->brick(sl);
        // Sample the shared face from the smaller side.
        const Brick& small = f.hanging() ? slave : master;
        for (int k = 0; k < 5; ++k) {
          Point x{};
          for (int a = 0; a <= d; ++a) {
            x[a] = small.anchor[a] + small.sizes[a] * std::uniform_real_distribution<double>(0.05, 0.95)(rng);
          }
          x[f.axis] = slave.anchor[f.axis] + (master.anchor[f.axis] < slave.anchor[f.axis] ? 0.0 : slave.sizes[f.axis]);
          auto value_in = [&](const Brick& b) {
            const int e = s.element_of_brick(b.id);
            s.gather(e, full, local);
            Point ref{};
            for (int a = 0; a <= d; ++a) ref[a] = (x[a] - b.anchor[a]) / b.sizes[a];
            return evaluate_local(s.shapes(), d + 1, b, local, ref).value;
          };
          REQUIRE(value_in(master) == doctest::Approx(value_in(slave)).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("prolongation is exact for nested spaces") {
  auto coarse_mesh = random_mesh(1, 5, 2);
  const FeSpace coarse = build_space(coarse_mesh, 2);
  auto fine_mesh = mesh_ptr(refine(*coarse_mesh, uniform_directives(*coarse_mesh)));
  const FeSpace fine = build_space(fine_mesh, 2);
  std::mt19937 rng(9);
  std::vector<double> uc(coarse.num_true());
  for (double& x : uc) x = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
  const auto uf = prolongate(coarse, uc, fine);
  const auto fc = coarse.expand(uc);
  const auto ff = fine.expand(uf);
  for (int k = 0; k < 50; ++k) {
    const Point x{std::uniform_real_distribution<double>(0.0, 1.0)(rng),
                  std::uniform_real_distribution<double>(0.0, 1.0)(rng), 0.0};
    CHECK(evaluate_at(fine, ff, x).value == doctest::Approx(evaluate_at(coarse, fc, x).value));
  }
}

TEST_CASE("essential dofs sit on the lateral and initial boundary") {
  const FeSpace s = build_space(unit(1, {3, 3}), 1, smooth_problem(1).boundary_data());
  int count = 0;
  for (int i = 0; i < s.num_true(); ++i) {
    const Point& x = s.node_position(s.node_of_true(i));
    const bool expected = x[0] == 0.0 || x[0] == 1.0 || x[1] == 0.0;
    CHECK(static_cast<bool>(s.essential()[i]) == expected);
    count += expected ? 1 : 0;
  }
  CHECK(s.num_essential() == count);
  CHECK(count == 4 + 4 + 2);
  const auto terminal = s.boundary_mask(kTerminal);
  int top = 0;
  for (char c : terminal) top += c;
  CHECK(top == 4);
}

TEST_CASE("cut space duplicates nodes inside the slit") {
  const ProblemSpec pb = slit_problem(SlitGeometry::classical);
  auto m = mesh_ptr(build_tensor_mesh(pb.domain, std::vector<int>{4, 4, 2}));
  const FeSpace plain(m, 1);
  const FeSpace cut(m, 1, true);
  // Nodes on the slit away from its tip; the outer end lies on the boundary and is cut too.
  int inside = 0;
  for (int n = 0; n < plain.num_nodes(); ++n) {
    const Point& x = plain.node_position(n);
    if (x[1] == 0.0 && x[0] > 0.0 && x[0] <= 1.0) ++inside;
  }
  CHECK(inside == 6);
  CHECK(cut.num_true() == plain.num_true() + inside);

  // Generic coefficients jump across the slit but not across the line y = 0 left of the tip.
  std::mt19937 rng(1);
  std::vector<double> u(cut.num_true());
  for (double& x : u) x = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
  const auto full = cut.expand(u);
  std::vector<double> local(cut.nodes_per_element());
  auto trace = [&](double x0, bool from_above) {
    const int id = m->locate({x0, from_above ? 0.1 : -0.1, 0.5});
    cut.gather(cut.element_of_brick(id), full, local);
    const Brick b = m->brick(id);
    const Point ref{(x0 - b.anchor[0]) / b.sizes[0], from_above ? 0.0 : 1.0,
                    (0.5 - b.anchor[2]) / b.sizes[2]};
    return evaluate_local(cut.shapes(), 3, b, local, ref).value;
  };
  CHECK(std::abs(trace(0.75, true) - trace(0.75, false)) > 1e-3);
  CHECK(trace(-0.25, true) == doctest::Approx(trace(-0.25, false)));
}

}
