#include "stfem/adaptivity.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <numeric>
#include <ostream>

#include "stfem/norms.hpp"

namespace stfem {

RefinementMode parse_refinement_mode(const std::string& name) {
  if (name == "uniform") return RefinementMode::uniform;
  if (name == "isotropic" || name == "isotropic-adaptive") return RefinementMode::isotropic;
  if (name == "anisotropic" || name == "anisotropic-adaptive") return RefinementMode::anisotropic;
  fail(ErrorKind::config, "unknown refinement mode '" + name + "'");
}

std::string to_string(RefinementMode mode) {
  switch (mode) {
    case RefinementMode::uniform:
      return "uniform";
    case RefinementMode::isotropic:
      return "isotropic";
    case RefinementMode::anisotropic:
      return "anisotropic";
  }
  return "?";
}

void AdaptConfig::validate() const {
  require(sigma > 0.0 && sigma < 1.0, ErrorKind::parameter, "sigma must lie in (0, 1)");
  require(chi > 0.0 && chi < 1.0, ErrorKind::parameter, "chi must lie in (0, 1)");
  require(max_dofs > 0 && max_levels > 0, ErrorKind::parameter,
          "max_dofs and max_levels must be positive");
  require(rtol_coarse > 0.0 && rtol_inner > 0.0, ErrorKind::parameter,
          "solver tolerances must be positive");
}

std::vector<int> doerfler_mark(std::span<const double> eta2, double sigma) {
  require(sigma > 0.0 && sigma < 1.0, ErrorKind::parameter, "sigma must lie in (0, 1)");
  double total = 0.0;
  std::vector<int> order;
  for (std::size_t i = 0; i < eta2.size(); ++i) {
    if (eta2[i] > 0.0) {
      total += eta2[i];
      order.push_back(static_cast<int>(i));
    }
  }
  std::vector<int> marked;
  if (total <= 0.0) return marked;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return eta2[a] > eta2[b]; });
  // The slack keeps rounding in the running sum from marking one element too many.
  const double goal = sigma * total * (1.0 - 1e-12);
  double sum = 0.0;
  for (int i : order) {
    marked.push_back(i);
    sum += eta2[i];
    if (sum >= goal) break;
  }
  return marked;
}

unsigned directive_axes(const Point& e_k, int dim, double chi) {
  double norm2 = 0.0;
  for (int a = 0; a < dim; ++a) norm2 += e_k[a] * e_k[a];
  const double threshold = chi * std::sqrt(norm2);
  unsigned axes = 0;
  for (int a = 0; a < dim; ++a) {
    if (e_k[a] > threshold) axes |= 1u << a;
  }
  if (axes == 0) axes = (1u << dim) - 1u;
  return axes;
}

std::vector<RefinementDirective> refinement_directives(const FeSpace& space,
                                                       std::span<const int> marked,
                                                       std::span<const Point> anisotropy,
                                                       double chi, RefinementMode mode) {
  const int D = space.dim();
  const unsigned all = (1u << D) - 1u;
  std::vector<RefinementDirective> out;
  out.reserve(marked.size());
  for (int e : marked) {
    unsigned axes = all;
    if (mode == RefinementMode::anisotropic) {
      require(static_cast<std::size_t>(e) < anisotropy.size(), ErrorKind::invalid_argument,
              "anisotropy vector missing for a marked element");
      axes = directive_axes(anisotropy[e], D, chi);
    }
    out.push_back({space.brick_id(e), axes});
  }
  return out;
}

std::vector<RefinementDirective> drop_saturated_axes(const BrickMesh& mesh,
                                                     std::span<const RefinementDirective> in) {
  std::vector<RefinementDirective> out;
  out.reserve(in.size());
  for (RefinementDirective d : in) {
    const auto levels = mesh.levels(d.element);
    for (int a = 0; a < mesh.dim(); ++a) {
      if (levels[a] >= kMaxLevel) d.axes &= ~(1u << a);
    }
    if (d.axes != 0) out.push_back(d);
  }
  return out;
}

int StudyRecord::total_iterations() const {
  int s = 0;
  for (const LevelRecord& l : levels) s += l.iterations;
  return s;
}

StudyRecord adaptive_loop(const ProblemSpec& problem, const StudySetup& setup,
                          const LevelCallback& on_level) {
  const AdaptConfig& cfg = setup.adapt;
  cfg.validate();
  StudyRecord study;
  study.problem = problem.name;
  study.dim = problem.domain.dim;

  EstimatorConfig est = setup.estimator;
  est.kind = cfg.estimator;
  const double eps = est.kind == MajorantKind::eta1 ? 1.0 : 1.0 - 1.0 / est.gamma;
  const double kappa = 2.0 - est.delta;

  auto mesh = std::make_shared<const BrickMesh>(
      build_tensor_mesh(problem.domain, setup.initial_cells));
  std::unique_ptr<FeSpace> prev_space;
  std::vector<double> prev_u;
  auto space = std::make_unique<FeSpace>(build_space(mesh, setup.degree, problem.boundary_data()));

  for (int level = 0; level < cfg.max_levels; ++level) {
    const auto t0 = std::chrono::steady_clock::now();
    LevelRecord rec;
    rec.level = level;
    rec.num_dofs = space->num_true();
    rec.num_elements = space->num_elements();

    const LinearSystem sys = assemble(*space, problem, setup.stabilization, setup.quadrature);
    SolverConfig scfg = setup.solver;
    std::vector<double> x0;
    if (level == 0 || !cfg.nested) {
      scfg.fgmres.rtol = cfg.rtol_coarse;
    } else {
      scfg.fgmres.rtol = cfg.rtol_inner;
      x0 = sys.restrict_to_free(prolongate(*prev_space, prev_u, *space));
    }
    SolveStats stats;
    std::vector<double> u;
    try {
      u = solve_system(*space, sys, scfg, x0, &stats);
    } catch (const Error& err) {
      study.failure = err.what();
      return study;
    }
    rec.iterations = stats.iterations;
    rec.initial_residual = stats.initial_residual;
    rec.final_residual = stats.final_residual;
    if (!stats.converged) {
      study.failure = "FGMRES did not converge on level " + std::to_string(level);
      rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      study.levels.push_back(rec);
      return study;
    }

    const MajorantResult mr = estimate(*space, problem, u, est, setup.quadrature);
    rec.majorant = mr.indicators.total;
    if (problem.exact) {
      const FeFunction uh(*space, u);
      const AnalyticField ex(*problem.exact);
      const DifferenceField err(ex, uh);
      const QuadraturePolicy eq = setup.quadrature.for_errors();
      rec.error_h = norm_h(*space, problem, err, setup.stabilization, eq);
      rec.triple_error = triple_norm(*space, problem, err, eps, kappa, eq);
      if (rec.triple_error > 0.0) rec.eff_index = std::sqrt(std::max(rec.majorant, 0.0)) / rec.triple_error;
    }

    const bool last = level + 1 == cfg.max_levels;
    std::vector<RefinementDirective> directives;
    if (!last) {
      if (cfg.mode == RefinementMode::uniform) {
        directives = uniform_directives(*mesh);
        rec.marked = space->num_elements();
      } else {
        const std::vector<int> marked = doerfler_mark(mr.indicators.marking_values(), cfg.sigma);
        rec.marked = static_cast<int>(marked.size());
        directives = refinement_directives(*space, marked, mr.indicators.anisotropy, cfg.chi,
                                           cfg.mode);
      }
    }
    directives = drop_saturated_axes(*mesh, directives);
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    study.levels.push_back(rec);
    if (on_level) on_level(LevelView{study.levels.back(), *space, u, mr});
    if (last) {
      study.stop_reason = "max_levels";
      break;
    }
    if (directives.empty()) {
      study.stop_reason = "nothing_to_refine";
      break;
    }

    std::shared_ptr<const BrickMesh> fine_mesh;
    try {
      fine_mesh = std::make_shared<const BrickMesh>(refine(*mesh, directives));
    } catch (const Error& err) {
      // The closure can still hit the lattice depth limit on a neighbour.
      study.stop_reason = std::string("refinement: ") + err.what();
      break;
    }
    auto fine_space =
        std::make_unique<FeSpace>(build_space(fine_mesh, setup.degree, problem.boundary_data()));
    if (fine_space->num_true() > cfg.max_dofs) {
      study.stop_reason = "max_dofs";
      break;
    }
    prev_space = std::move(space);
    prev_u = std::move(u);
    mesh = std::move(fine_mesh);
    space = std::move(fine_space);
  }
  study.completed = true;
  return study;
}

void write_study_csv(std::ostream& os, const StudyRecord& study) {
  os << "level,N_h,error_h,triple_norm_error,majorant,eff_index,iterations,wall_time\n";
  const auto old = os.precision(10);
  for (const LevelRecord& l : study.levels) {
    os << l.level << ',' << l.num_dofs << ',' << l.error_h << ',' << l.triple_error << ','
       << l.majorant << ',' << l.eff_index << ',' << l.iterations << ',' << l.wall_time << '\n';
  }
  os.precision(old);
}

double least_squares_slope(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, ErrorKind::invalid_argument,
          "slope needs at least two points");
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  require(sxx > 0.0, ErrorKind::invalid_argument, "slope needs distinct abscissae");
  return sxy / sxx;
}

double convergence_rate(const StudyRecord& study, int count, bool use_triple) {
  const int n = static_cast<int>(study.levels.size());
  require(count >= 2 && n >= count, ErrorKind::invalid_argument,
          "not enough levels for a rate estimate");
  std::vector<double> h, err;
  for (int i = n - count; i < n; ++i) {
    const LevelRecord& l = study.levels[i];
    h.push_back(std::pow(static_cast<double>(l.num_dofs), -1.0 / study.dim));
    err.push_back(use_triple ? l.triple_error : l.error_h);
  }
  return least_squares_slope(h, err);
}

}  // namespace stfem
