// Acceptance run: one PASS/FAIL line per criterion. Tolerances are fixed below.
//
//   stfem_acceptance [--only 1,3,...] [--report <file>]
//   stfem_acceptance --check <n> --report <file>
//
// With --check the binary only reads a previous report and exits 0 when criterion n
// passed; ctest uses this (after a --zero-exit run) so that each criterion shows up as
// its own test.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stfem/adaptivity.hpp"
#include "stfem/bench.hpp"
#include "stfem/norms.hpp"
#include "stfem/problems.hpp"

using namespace stfem;

namespace {

// ---- tolerances -------------------------------------------------------------------
constexpr double kElementTol = 1e-12;     // 1: relative Frobenius error
constexpr double kReproductionTol = 1e-8; // 2: ||u_h - I_h u||_h
constexpr double kSmoothTol[] = {0.0, 0.1, 0.15};  // 3: indexed by p
constexpr double kAnisoTol = 0.15;        // 4
constexpr double kSlitUniformRate = 0.5;  // 5
constexpr double kSlitUniformTol = 0.1;
constexpr long kSlitUniformDofs = 500'000;
constexpr double kAdaptiveP1Rate = 0.9;   // 6: 1.0 - 0.1
constexpr long kAdaptiveP1Dofs = 20'000;
constexpr double kP2AnisoRate = 2.0;      // 7
constexpr double kP2IsoRate = 1.25;
constexpr double kP2Tol = 0.25;
constexpr double kP2Separation = 0.5;
constexpr long kAdaptiveP2Dofs = 60'000;
constexpr double kBoundSlack = 1e-10;     // 8
constexpr long kNestedDofs = 10'000;      // 10
const std::map<int, double> kRuntimeLimit = {{1, 60}, {2, 60}, {3, 300}, {4, 300}, {5, 1800}, {9, 300}};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// Studies with an exact solution, for the bound check.
std::vector<std::pair<std::string, StudyRecord>> g_studies;

void keep(const std::string& name, const StudyRecord& r) { g_studies.emplace_back(name, r); }

void progress(const std::string& name, const LevelRecord& l) {
  std::fprintf(stderr, "  [%s] level %d N=%d err=%.4e Ieff=%.3f it=%d %.1fs\n", name.c_str(),
               l.level, l.num_dofs, l.error_h, l.eff_index, l.iterations, l.wall_time);
}

StudyRecord run(const std::string& name, const ProblemSpec& pb, const StudySetup& s) {
  StudyRecord r = adaptive_loop(pb, s, [&](const LevelView& v) { progress(name, v.record); });
  if (!r.failure.empty()) std::fprintf(stderr, "  [%s] aborted: %s\n", name.c_str(), r.failure.c_str());
  keep(name, r);
  return r;
}

// ---- 1: element matrices against an independent evaluation ----------------------

// Gauss-Legendre on [0, 1] by Newton iteration on P_n.
void legendre_rule(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = 0.5 * (1.0 - z);
    w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
}

// Lagrange basis on hard-coded Gauss-Lobatto nodes.
struct Basis1D {
  std::vector<double> nodes;
  explicit Basis1D(int p) {
    if (p == 1) nodes = {0.0, 1.0};
    if (p == 2) nodes = {0.0, 0.5, 1.0};
    if (p == 3) nodes = {0.0, 0.5 - 0.5 / std::sqrt(5.0), 0.5 + 0.5 / std::sqrt(5.0), 1.0};
  }
  // value, first and second derivative of basis function i at s
  std::array<double, 3> eval(int i, double s) const {
    const int n = static_cast<int>(nodes.size());
    double v = 1.0, d1 = 0.0, d2 = 0.0;
    // product rule over the factors (s - x_j) / (x_i - x_j)
    std::vector<double> f, g;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      f.push_back((s - nodes[j]) / (nodes[i] - nodes[j]));
      g.push_back(1.0 / (nodes[i] - nodes[j]));
    }
    const int m = static_cast<int>(f.size());
    for (int a = 0; a < m; ++a) v *= f[a];
    for (int a = 0; a < m; ++a) {
      double t = g[a];
      for (int b = 0; b < m; ++b) if (b != a) t *= f[b];
      d1 += t;
      for (int b = 0; b < m; ++b) {
        if (b == a) continue;
        double u = g[a] * g[b];
        for (int c = 0; c < m; ++c) if (c != a && c != b) u *= f[c];
        d2 += u;
      }
    }
    return {v, d1, d2};
  }
};

struct Nu {
  std::array<double, 4> c;  // nu = c0 + c1 x0 + c2 x1 + c3 t (d = 2), time last
  int dim;
  double operator()(const Point& x) const {
    double v = c[0];
    for (int a = 0; a < dim; ++a) v += c[a + 1] * x[a];
    return v;
  }
};

// Reference matrix and load with 2 (p + 2) points per axis.
void reference_element(const Brick& b, int p, const Nu& nu, bool variable,
                       const std::function<double(const Point&)>& f, double s,
                       std::vector<double>& mat, std::vector<double>& load) {
  const int D = b.dim;
  const int n1 = p + 1;
  int nb = 1;
  for (int a = 0; a < D; ++a) nb *= n1;
  const Basis1D basis(p);
  std::vector<double> qx, qw;
  legendre_rule(2 * (p + 2), qx, qw);
  const int nq = static_cast<int>(qx.size());
  mat.assign(static_cast<std::size_t>(nb) * nb, 0.0);
  load.assign(nb, 0.0);
  std::vector<double> val(nb);
  std::vector<Point> grad(nb), sec(nb);
  int total = 1;
  for (int a = 0; a < D; ++a) total *= nq;
  for (int k = 0; k < total; ++k) {
    Point ref{}, x{};
    double w = 1.0;
    int rem = k;
    for (int a = 0; a < D; ++a) {
      const int q = rem % nq;
      rem /= nq;
      ref[a] = qx[q];
      x[a] = b.anchor[a] + b.sizes[a] * qx[q];
      w *= qw[q] * b.sizes[a];
    }
    for (int i = 0; i < nb; ++i) {
      std::array<std::array<double, 3>, kMaxDim> e{};
      int r = i;
      for (int a = 0; a < D; ++a) {
        e[a] = basis.eval(r % n1, ref[a]);
        r /= n1;
      }
      val[i] = 1.0;
      for (int a = 0; a < D; ++a) val[i] *= e[a][0];
      for (int c = 0; c < D; ++c) {
        double g = 1.0, h = 1.0;
        for (int a = 0; a < D; ++a) {
          g *= a == c ? e[a][1] / b.sizes[a] : e[a][0];
          h *= a == c ? e[a][2] / (b.sizes[a] * b.sizes[a]) : e[a][0];
        }
        grad[i][c] = g;
        sec[i][c] = h;
      }
    }
    const int t = D - 1;
    const double nq_val = variable ? nu(x) : 1.0;
    for (int j = 0; j < nb; ++j) {
      // div_x(nu grad_x phi_j)
      double div = 0.0;
      for (int c = 0; c < t; ++c) {
        div += nq_val * sec[j][c] + (variable ? nu.c[c + 1] : 0.0) * grad[j][c];
      }
      for (int i = 0; i < nb; ++i) {
        double gg = 0.0;
        for (int c = 0; c < t; ++c) gg += grad[j][c] * grad[i][c];
        mat[static_cast<std::size_t>(i) * nb + j] +=
            w * (grad[j][t] * val[i] + s * grad[j][t] * grad[i][t] + nq_val * gg - s * div * grad[i][t]);
      }
    }
    const double fx = f(x);
    for (int i = 0; i < nb; ++i) load[i] += w * fx * (val[i] + s * grad[i][t]);
  }
}

Outcome criterion1() {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double worst = 0.0;
  int cases = 0;
  for (int D = 2; D <= 3; ++D) {
    for (int p = 1; p <= 3; ++p) {
      for (int variable = 0; variable < 2; ++variable) {
        for (int rep = 0; rep < 5; ++rep) {
          Brick b;
          b.dim = D;
          for (int a = 0; a < D; ++a) {
            b.anchor[a] = U(rng);
            b.sizes[a] = std::pow(10.0, -2.0 * U(rng));  // aspect ratios up to 100
          }
          Nu nu{{1.0 + U(rng), 0.3 * U(rng), 0.3 * U(rng), 0.3 * U(rng)}, D};
          if (D == 2) nu.c[3] = 0.0;
          nu.c[D] = 0.2 * U(rng);  // time dependence
          Coefficient coef = Coefficient::constant(1.0);
          if (variable) {
            coef.value = nu;
            coef.grad_x = [nu](const Point&) { return Point{nu.c[1], nu.c[2], 0.0}; };
            if (D == 2) coef.grad_x = [nu](const Point&) { return Point{nu.c[1], 0.0, 0.0}; };
          }
          const auto f = [](const Point& x) { return 1.0 + x[0] * x[0] * x[1] - 2.0 * x[2]; };
          const StabilizationParams stab;
          const ShapeSet shapes(p);
          // the library's own rule: p + 1 points, one more for variable nu
          const QuadratureRule rule = tensor_rule(D, p + 1 + variable);
          const DenseMatrix a = element_matrix(b, coef, stab.theta_k(b), stab.h_k(b), shapes, rule);
          const std::vector<double> l = element_load(b, f, stab.theta_k(b), stab.h_k(b), shapes, rule);
          std::vector<double> am, al;
          reference_element(b, p, nu, variable != 0, f, stab.weight(b), am, al);
          double num = 0.0, den = 0.0;
          for (std::size_t k = 0; k < am.size(); ++k) {
            num += (a.data[k] - am[k]) * (a.data[k] - am[k]);
            den += am[k] * am[k];
          }
          worst = std::max(worst, std::sqrt(num / den));
          num = den = 0.0;
          for (std::size_t k = 0; k < al.size(); ++k) {
            num += (l[k] - al[k]) * (l[k] - al[k]);
            den += al[k] * al[k];
          }
          worst = std::max(worst, std::sqrt(num / den));
          ++cases;
        }
      }
    }
  }
  return {worst <= kElementTol,
          std::to_string(cases) + " bricks, max relative Frobenius error " + fmt("%.2e", worst) +
              " (tol " + fmt("%.0e", kElementTol) + ")"};
}

// ---- 2: exact reproduction ---------------------------------------------------------

std::shared_ptr<const BrickMesh> random_mesh(const DomainSpec& dom, unsigned seed, int target) {
  std::mt19937 rng(seed);
  const int D = dom.dim;
  BrickMesh m = build_tensor_mesh(dom, std::vector<int>(D, 2));
  while (m.num_active() < target) {
    // marking probability chosen so that the mesh does not overshoot much
    const double room = double(target - m.num_active()) / (m.num_active() * ((1 << D) - 1));
    std::bernoulli_distribution mark(std::min(0.2, room));
    std::vector<RefinementDirective> dirs;
    for (int id : m.active()) {
      if (mark(rng)) dirs.push_back({id, 1u + static_cast<unsigned>(rng() % ((1u << D) - 1))});
    }
    if (dirs.empty()) dirs.push_back({m.active()[0], 1u});
    m = refine(m, dirs);
  }
  return std::make_shared<const BrickMesh>(std::move(m));
}

// Product of one polynomial of degree p per axis.
AnalyticFunction tensor_polynomial(int d, int p) {
  auto q = [p](double s, int a) { return 1.0 + 0.5 * a + s + std::pow(s, p) * (a + 1); };
  auto dq = [p](double s, int a) { return 1.0 + p * std::pow(s, p - 1) * (a + 1); };
  auto ddq = [p](double s, int a) { return p >= 2 ? p * (p - 1) * std::pow(s, p - 2) * (a + 1) : 0.0; };
  const int D = d + 1;
  AnalyticFunction u;
  u.value = [=](const Point& x) {
    double v = 1.0;
    for (int a = 0; a < D; ++a) v *= q(x[a], a);
    return v;
  };
  u.gradient = [=](const Point& x) {
    Point g{};
    for (int c = 0; c < D; ++c) {
      g[c] = 1.0;
      for (int a = 0; a < D; ++a) g[c] *= a == c ? dq(x[a], a) : q(x[a], a);
    }
    return g;
  };
  u.second = [=](const Point& x) {
    Point s{};
    for (int c = 0; c < D; ++c) {
      s[c] = 1.0;
      for (int a = 0; a < D; ++a) s[c] *= a == c ? ddq(x[a], a) : q(x[a], a);
    }
    return s;
  };
  return u;
}

Outcome criterion2() {
  struct Case { int d, p, target; };
  double worst = 0.0;
  std::string sizes;
  for (Case c : {Case{1, 1, 10000}, Case{1, 2, 10000}, Case{1, 3, 4000}, Case{2, 1, 10000},
                 Case{2, 2, 3000}}) {
    const DomainSpec dom = DomainSpec::unit_cylinder(c.d);
    const ProblemSpec pb = manufactured_problem(dom, tensor_polynomial(c.d, c.p), "poly");
    auto mesh = random_mesh(dom, 100 + c.d * 10 + c.p, c.target);
    const FeSpace space = build_space(mesh, c.p, pb.boundary_data());
    const StabilizationParams stab;
    const LinearSystem sys = assemble(space, pb, stab);
    SolveStats st;
    SolverConfig cfg{PreconditionerKind::sparse_lu, {1e-13, 100, 200}};
    const auto u = solve_system(space, sys, cfg, {}, &st);
    const auto iu = interpolate(space, pb.exact->value);
    const FeFunction uh(space, u), ih(space, iu);
    const DifferenceField diff(uh, ih);
    const double e = norm_h(space, pb, diff, stab);
    worst = std::max(worst, st.converged ? e : INFINITY);
    sizes += " d=" + std::to_string(c.d) + ",p=" + std::to_string(c.p) + ":" +
             std::to_string(mesh->num_active()) + "el";
  }
  return {worst <= kReproductionTol,
          "max ||u_h - I_h u||_h = " + fmt("%.2e", worst) + " on" + sizes};
}

// ---- 3: smooth rates ---------------------------------------------------------------

Outcome criterion3() {
  const ProblemSpec pb = smooth_problem(1);
  bool pass = true;
  std::string detail;
  for (int p = 1; p <= 2; ++p) {
    StudySetup s;
    s.degree = p;
    s.initial_cells = {2, 2};
    s.adapt.mode = RefinementMode::uniform;
    s.adapt.max_levels = 6;
    s.adapt.max_dofs = 10'000'000;
    s.solver.fgmres.rtol = 1e-10;
    s.adapt.nested = false;
    const StudyRecord r = run("smooth p=" + std::to_string(p), pb, s);
    const double rate = r.levels.size() == 6 ? convergence_rate(r, 3) : 0.0;
    const bool ok = std::abs(rate - p) <= kSmoothTol[p];
    pass = pass && ok;
    detail += "p=" + std::to_string(p) + " rate " + fmt("%.3f", rate) + " (target " +
              std::to_string(p) + " +- " + fmt("%.2f", kSmoothTol[p]) + ") ";
  }
  return {pass, detail};
}

// ---- 4: anisotropic a priori rates -------------------------------------------------

Outcome criterion4() {
  const AnisotropicRateReport r = anisotropic_rate_study(anisotropic_problem());
  const bool ok_x = std::abs(r.in_x.slope - 1.0) <= kAnisoTol;
  const bool ok_t = std::abs(r.in_t.slope - 1.0) <= kAnisoTol;
  std::string d = "||.||_h slope in h_x " + fmt("%.3f", r.in_x.slope) + (ok_x ? " ok" : " out") +
                  ", in h_t " + fmt("%.3f", r.in_t.slope) + (ok_t ? " ok" : " out") +
                  " (target 1 +- 0.15); ||.||_h* slopes " + fmt("%.3f", r.in_x.slope_star) + " / " +
                  fmt("%.3f", r.in_t.slope_star);
  return {ok_x && ok_t, d};
}

// ---- 5..7, 10: slit studies ----------------------------------------------------------

StudySetup slit_setup(int p, RefinementMode mode, MajorantKind kind, long max_dofs) {
  StudySetup s;
  s.degree = p;
  s.initial_cells = {2, 2, 2};
  s.adapt.mode = mode;
  s.adapt.estimator = kind;
  s.estimator.kind = kind;
  s.adapt.chi = p == 1 ? 0.1 : 0.15;
  s.adapt.max_levels = 60;
  s.adapt.max_dofs = max_dofs;
  if (p == 1) {
    // Exact flux solves; the cheap CG sweeps stall on strongly graded meshes.
    s.estimator.minimize = {10, 0, false, true, 1e-3};
  } else {
    s.estimator.minimize = {10, 100, true, false, 1e-3};
  }
  return s;
}

const ProblemSpec& slit() {
  static const ProblemSpec pb = slit_problem(SlitGeometry::classical);
  return pb;
}

Outcome criterion5() {
  StudySetup s = slit_setup(1, RefinementMode::uniform, MajorantKind::eta1, kSlitUniformDofs);
  s.estimator.minimize = {5, 5, false, false, 0.0};
  const StudyRecord r = run("slit uniform p=1", slit(), s);
  const double rate = r.levels.size() >= 3 ? convergence_rate(r, 3) : 0.0;
  const int n = r.levels.empty() ? 0 : r.levels.back().num_dofs;
  return {r.failure.empty() && std::abs(rate - kSlitUniformRate) <= kSlitUniformTol,
          "rate " + fmt("%.3f", rate) + " over the last 3 of " + std::to_string(r.levels.size()) +
              " levels, final N_h " + std::to_string(n) + " (target 0.5 +- 0.1)"};
}

// error of `r` interpolated in log-log at N (or -1 outside its range)
double error_at(const StudyRecord& r, double n) {
  for (std::size_t k = 1; k < r.levels.size(); ++k) {
    const double n0 = r.levels[k - 1].num_dofs, n1 = r.levels[k].num_dofs;
    if (n >= n0 && n <= n1) {
      const double s = std::log(n / n0) / std::log(n1 / n0);
      return std::exp((1.0 - s) * std::log(r.levels[k - 1].error_h) + s * std::log(r.levels[k].error_h));
    }
  }
  return -1.0;
}

Outcome criterion6() {
  bool pass = true;
  std::string detail;
  for (MajorantKind kind : {MajorantKind::eta1, MajorantKind::eta2}) {
    const std::string k = kind == MajorantKind::eta1 ? "eta1" : "eta2";
    const StudyRecord an = run("slit p=1 aniso " + k, slit(),
                               slit_setup(1, RefinementMode::anisotropic, kind, kAdaptiveP1Dofs));
    const StudyRecord is = run("slit p=1 iso " + k, slit(),
                               slit_setup(1, RefinementMode::isotropic, kind, kAdaptiveP1Dofs));
    const double ra = an.levels.size() >= 3 ? convergence_rate(an, 3) : 0.0;
    const double ri = is.levels.size() >= 3 ? convergence_rate(is, 3) : 0.0;
    // anisotropic error against the isotropic curve at the same N_h, final two levels
    int better = 0, compared = 0;
    for (std::size_t j = an.levels.size() >= 2 ? an.levels.size() - 2 : 0; j < an.levels.size(); ++j) {
      const double e = error_at(is, an.levels[j].num_dofs);
      if (e < 0.0) continue;
      ++compared;
      if (an.levels[j].error_h <= e) ++better;
    }
    const bool ok = an.failure.empty() && is.failure.empty() && ra >= kAdaptiveP1Rate &&
                    ri >= kAdaptiveP1Rate && compared == 2 && better == 2;
    pass = pass && ok;
    detail += k + ": rate aniso " + fmt("%.3f", ra) + ", iso " + fmt("%.3f", ri) +
              ", aniso <= iso on " + std::to_string(better) + "/" + std::to_string(compared) +
              " final levels; ";
  }
  return {pass, detail + "(rate >= 0.9)"};
}

Outcome criterion7() {
  const StudyRecord an = run("slit p=2 aniso", slit(),
                             slit_setup(2, RefinementMode::anisotropic, MajorantKind::eta1, kAdaptiveP2Dofs));
  const StudyRecord is = run("slit p=2 iso", slit(),
                             slit_setup(2, RefinementMode::isotropic, MajorantKind::eta1, kAdaptiveP2Dofs));
  const double ra = an.levels.size() >= 3 ? convergence_rate(an, 3) : 0.0;
  const double ri = is.levels.size() >= 3 ? convergence_rate(is, 3) : 0.0;
  const bool absolute = std::abs(ra - kP2AnisoRate) <= kP2Tol && std::abs(ri - kP2IsoRate) <= kP2Tol;
  const bool separated = ra - ri >= kP2Separation;
  const bool ok = an.failure.empty() && is.failure.empty() && (absolute || separated);
  return {ok, "rate aniso " + fmt("%.3f", ra) + " (2 +- 0.25), iso " + fmt("%.3f", ri) +
                  " (1.25 +- 0.25): " + (absolute ? "absolute tolerances met" :
                  separated ? "qualitative separation >= 0.5 only" : "neither") +
                  ", final N_h " + std::to_string(an.levels.empty() ? 0 : an.levels.back().num_dofs) +
                  " / " + std::to_string(is.levels.empty() ? 0 : is.levels.back().num_dofs)};
}

Outcome criterion10() {
  StudySetup s = slit_setup(1, RefinementMode::anisotropic, MajorantKind::eta1, kNestedDofs);
  s.estimator.minimize = {5, 5, false, false, 0.0};
  s.adapt.nested = true;
  const StudyRecord warm = run("slit nested", slit(), s);
  s.adapt.nested = false;
  const StudyRecord cold = run("slit cold", slit(), s);
  const std::size_t n = std::min(warm.levels.size(), cold.levels.size());
  int wi = 0, ci = 0;
  for (std::size_t k = 0; k < n; ++k) {
    wi += warm.levels[k].iterations;
    ci += cold.levels[k].iterations;
  }
  return {n >= 3 && wi < ci, "cumulative FGMRES iterations over " + std::to_string(n) +
                                 " levels: nested " + std::to_string(wi) + ", cold " + std::to_string(ci)};
}

Outcome criterion8() {
  if (g_studies.empty()) return {false, "no studies ran"};
  int levels = 0;
  double worst = INFINITY;
  std::string where;
  for (const auto& [name, r] : g_studies) {
    for (const LevelRecord& l : r.levels) {
      if (l.triple_error < 0.0) continue;
      ++levels;
      const double t2 = l.triple_error * l.triple_error;
      const double margin = (l.majorant - t2) / std::max(t2, 1e-300);
      if (margin < worst) {
        worst = margin;
        where = name + " level " + std::to_string(l.level) + ", I_eff " + fmt("%.4f", l.eff_index);
      }
    }
  }
  return {levels > 0 && worst >= -kBoundSlack,
          std::to_string(levels) + " levels in " + std::to_string(g_studies.size()) +
              " studies; smallest (M - err^2)/err^2 = " + fmt("%.3e", worst) + " at " + where};
}

// ---- 9: property suites -------------------------------------------------------------

Outcome criterion9() {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int failures = 0;
  // bulk marking
  for (int run = 0; run < 1000; ++run) {
    const int n = 1 + static_cast<int>(rng() % 80);
    std::vector<double> e(n);
    for (double& x : e) x = U(rng) - 0.1;
    const double sigma = 0.05 + 0.9 * U(rng);
    const auto m = doerfler_mark(e, sigma);
    double total = 0.0, sum = 0.0, smallest = INFINITY;
    for (double x : e) total += std::max(x, 0.0);
    for (int i : m) {
      sum += e[i];
      smallest = std::min(smallest, e[i]);
    }
    if (total > 0.0 && (sum < sigma * total * (1.0 - 1e-12) || sum - smallest >= sigma * total)) ++failures;
  }
  const int f_mark = failures;
  // refinement axes against a brute-force threshold
  for (int run = 0; run < 1000; ++run) {
    const int dim = 2 + static_cast<int>(rng() % 2);
    Point e{};
    for (int a = 0; a < dim; ++a) e[a] = U(rng);
    const double chi = 0.01 + 0.98 * U(rng);
    double n2 = 0.0;
    for (int a = 0; a < dim; ++a) n2 += e[a] * e[a];
    unsigned expect = 0;
    for (int a = 0; a < dim; ++a) if (e[a] > chi * std::sqrt(n2)) expect |= 1u << a;
    if (expect == 0) expect = (1u << dim) - 1;
    if (directive_axes(e, dim, chi) != expect) ++failures;
  }
  const int f_axes = failures - f_mark;
  // mesh invariants and hanging-face continuity
  int samples = 0;
  for (int run = 0; run < 100; ++run) {
    const int d = 1 + run % 2;
    const DomainSpec dom = DomainSpec::unit_cylinder(d);
    auto mesh = random_mesh(dom, 1000 + run, 20 + static_cast<int>(rng() % 200));
    double vol = 0.0;
    for (int id : mesh->active()) vol += mesh->brick(id).volume();
    if (std::abs(vol - 1.0) > 1e-12) ++failures;
    for (int id : mesh->active()) {
      for (int axis = 0; axis <= d; ++axis) {
        for (int side = 0; side < 2; ++side) {
          for (int nb : mesh->face_neighbors(id, axis, side)) {
            const auto la = mesh->levels(id), lb = mesh->levels(nb);
            for (int a = 0; a <= d; ++a) if (std::abs(la[a] - lb[a]) > 1) ++failures;
          }
        }
      }
    }
    if (run % 10 != 0) continue;
    const FeSpace space = build_space(mesh, 1 + run % 3);
    std::vector<double> u(space.num_true());
    for (double& x : u) x = U(rng) - 0.5;
    const auto full = space.expand(u);
    std::vector<double> local(space.nodes_per_element());
    for (const Face& f : mesh->faces()) {
      if (!f.hanging()) continue;
      const Brick master = mesh->brick(f.master);
      for (int sl : f.slaves) {
        const Brick slave = mesh->brick(sl);
        Point x{};
        for (int a = 0; a <= d; ++a) x[a] = slave.anchor[a] + slave.sizes[a] * (0.1 + 0.8 * U(rng));
        x[f.axis] = master.anchor[f.axis] < slave.anchor[f.axis] ? slave.anchor[f.axis]
                                                                  : master.anchor[f.axis];
        double v[2];
        int k = 0;
        for (const Brick* b : {&master, &slave}) {
          space.gather(space.element_of_brick(b->id), full, local);
          Point ref{};
          for (int a = 0; a <= d; ++a) ref[a] = (x[a] - b->anchor[a]) / b->sizes[a];
          v[k++] = evaluate_local(space.shapes(), d + 1, *b, local, ref).value;
        }
        if (std::abs(v[0] - v[1]) > 1e-11) ++failures;
        ++samples;
      }
    }
  }
  const int f_mesh = failures - f_mark - f_axes;
  // FGMRES on random positive definite systems
  for (int run = 0; run < 200; ++run) {
    const int n = 1 + static_cast<int>(rng() % 50);
    std::vector<double> b(n * n);
    for (double& x : b) x = U(rng) - 0.5;
    std::vector<int> ri, ci;
    std::vector<double> v;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        double s = i == j ? 1.0 : 0.0;
        for (int k = 0; k < n; ++k) s += b[k * n + i] * b[k * n + j];
        ri.push_back(i);
        ci.push_back(j);
        v.push_back(s + 0.3 * (b[i * n + j] - b[j * n + i]));
      }
    }
    const CsrMatrix a = CsrMatrix::from_triplets(n, n, ri, ci, v);
    std::vector<double> rhs(n);
    for (double& x : rhs) x = U(rng) - 0.5;
    const auto m = make_preconditioner(a, PreconditionerKind::identity);
    const FgmresResult r = fgmres(a, rhs, {}, *m, {1e-12, n, 10 * n});
    auto res = a * r.x;
    for (int i = 0; i < n; ++i) res[i] -= rhs[i];
    if (!r.stats.converged || norm2(res) > 1e-10 * norm2(rhs) || r.stats.iterations > n) ++failures;
  }
  const int f_krylov = failures - f_mark - f_axes - f_mesh;
  // majorant histories never increase
  for (int run = 0; run < 6; ++run) {
    const ProblemSpec& pb = slit();
    auto mesh = random_mesh(pb.domain, 7 + run, 60);
    const FeSpace space = build_space(mesh, 1 + run % 2, pb.boundary_data());
    const LinearSystem sys = assemble(space, pb, StabilizationParams{});
    const auto u = solve_system(space, sys, {PreconditionerKind::sparse_lu, {}}, {});
    const MajorantParams prm = MajorantParams::defaults_for(pb);
    const MinimizeOptions o{5, 5, run % 3 == 1, run % 3 == 2, 0.0};
    const MajorantResult r = run % 2 ? minimize_majorant2(space, pb, u, prm, o)
                                     : minimize_majorant1(space, pb, u, prm, o);
    for (std::size_t k = 1; k < r.history.size(); ++k) {
      if (r.history[k] > r.history[k - 1]) ++failures;
    }
  }
  const int f_major = failures - f_mark - f_axes - f_mesh - f_krylov;
  return {failures == 0, "violations: marking " + std::to_string(f_mark) + "/1000, axes " +
                             std::to_string(f_axes) + "/1000, mesh+continuity " +
                             std::to_string(f_mesh) + " (100 meshes, " + std::to_string(samples) +
                             " hanging-face samples), FGMRES " +
                             std::to_string(f_krylov) + "/200, majorant monotonicity " +
                             std::to_string(f_major) + " (6 runs)"};
}

int check_report(const std::string& path, int n) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "no report at " << path << '\n';
    return 2;
  }
  const std::string key = "criterion " + std::to_string(n) + ":";
  for (std::string line; std::getline(in, line);) {
    if (line.rfind(key, 0) == 0) {
      std::cout << line << '\n';
      return line.find(": PASS") != std::string::npos ? 0 : 1;
    }
  }
  std::cerr << "criterion " << n << " missing from " << path << '\n';
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  std::string report;
  int check = 0;
  bool zero_exit = false;
  app.add_option("--only", only, "criteria to run (default all)")->delimiter(',');
  app.add_option("--report", report, "write (or with --check read) the PASS/FAIL lines");
  app.add_option("--check", check, "exit 0 iff the criterion passed in the report");
  app.add_flag("--zero-exit", zero_exit, "exit 0 once the report is written, whatever the verdicts");
  CLI11_PARSE(app, argc, argv);
  if (check) return check_report(report, check);

  const std::map<int, std::function<Outcome()>> criteria = {
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4}, {5, criterion5},
      {6, criterion6}, {7, criterion7}, {9, criterion9}, {10, criterion10}, {8, criterion8},
  };
  std::set<int> wanted(only.begin(), only.end());
  // 8 reads the studies of the others, so it runs last
  std::vector<int> order = {1, 2, 3, 4, 5, 6, 7, 9, 10, 8};
  std::map<int, std::string> lines;
  int failed = 0;
  for (int n : order) {
    if (!wanted.empty() && !wanted.count(n)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    const std::clock_t c0 = std::clock();
    Outcome o;
    try {
      o = criteria.at(n)();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    // runtime limits are checked on CPU time so a busy machine does not turn them red
    const double cpu = double(std::clock() - c0) / CLOCKS_PER_SEC;
    if (const auto lim = kRuntimeLimit.find(n); lim != kRuntimeLimit.end() && cpu > lim->second) {
      o.pass = false;
      o.detail += "; runtime " + fmt("%.0f", cpu) + " s over the " + fmt("%.0f", lim->second) + " s limit";
    }
    std::ostringstream line;
    line << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << " ["
         << fmt("%.1f", sec) << " s]";
    lines[n] = line.str();
    std::cout << lines[n] << std::endl;
    if (!o.pass) ++failed;
  }
  if (!report.empty()) {
    std::ofstream out(report);
    for (const auto& [n, l] : lines) out << l << '\n';
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : "all criteria passed") << '\n';
  return failed && !zero_exit ? 1 : 0;
}
