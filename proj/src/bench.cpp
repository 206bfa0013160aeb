#include "stfem/bench.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>

#include "stfem/norms.hpp"

namespace stfem {

TensorMeshError tensor_mesh_error(const ProblemSpec& problem, std::span<const int> cells,
                                  int degree, const StabilizationParams& stab,
                                  const SolverConfig& solver) {
  require(problem.exact.has_value(), ErrorKind::invalid_argument,
          "error evaluation needs an exact solution");
  auto mesh = std::make_shared<const BrickMesh>(build_tensor_mesh(problem.domain, cells));
  const FeSpace space = build_space(mesh, degree, problem.boundary_data());
  const LinearSystem sys = assemble(space, problem, stab);
  SolverConfig cfg = solver;
  cfg.fgmres.rtol = 1e-10;
  SolveStats stats;
  const std::vector<double> u = solve_system(space, sys, cfg, {}, &stats);
  require(stats.converged, ErrorKind::solver, "FGMRES did not converge on a tensor mesh");
  const FeFunction uh(space, u);
  const AnalyticField ex(*problem.exact);
  const DifferenceField err(ex, uh);
  const QuadraturePolicy eq = QuadraturePolicy{}.for_errors();
  return {norm_h(space, problem, err, stab, eq), norm_h_star(space, problem, err, stab, eq)};
}

AnisotropicRateReport anisotropic_rate_study(const ProblemSpec& problem,
                                             const AnisotropicRateOptions& options) {
  require(problem.domain.dim == 2, ErrorKind::invalid_argument,
          "the anisotropic rate study runs on d = 1 problems");
  require(options.coarse_cells.size() >= 2, ErrorKind::invalid_argument,
          "the anisotropic rate study needs at least two meshes per direction");
  AnisotropicRateReport report;
  for (int varied = 0; varied < 2; ++varied) {
    RateSeries& s = varied == 1 ? report.in_t : report.in_x;
    const double length = problem.domain.upper[varied] - problem.domain.lower[varied];
    for (int n : options.coarse_cells) {
      std::vector<int> cells(2, options.fine_cells);
      cells[varied] = n;
      s.h.push_back(length / n);
      const TensorMeshError e =
          tensor_mesh_error(problem, cells, options.degree, options.stabilization, options.solver);
      s.error.push_back(e.h);
      s.error_star.push_back(e.h_star);
    }
    s.slope = least_squares_slope(s.h, s.error);
    s.slope_star = least_squares_slope(s.h, s.error_star);
  }
  return report;
}

StudyReport summarize(StudyRecord record) {
  StudyReport r;
  r.record = std::move(record);
  const auto& levels = r.record.levels;
  const bool exact = !levels.empty() && levels.front().error_h >= 0.0;
  if (exact && levels.size() >= 3) {
    r.rate = convergence_rate(r.record, 3, false);
    r.rate_triple = convergence_rate(r.record, 3, true);
  }
  if (exact) {
    r.eff_min = r.eff_max = levels.front().eff_index;
    for (const LevelRecord& l : levels) {
      r.eff_min = std::min(r.eff_min, l.eff_index);
      r.eff_max = std::max(r.eff_max, l.eff_index);
    }
  }
  return r;
}

StudyReport run_study(const StudyConfig& config, const LevelCallback& on_level) {
  const ProblemSpec problem = config.make_problem();
  return summarize(adaptive_loop(problem, config.setup, on_level));
}

void write_summary(std::ostream& os, const StudyConfig& config, const StudyReport& report) {
  const StudyRecord& rec = report.record;
  const StudySetup& s = config.setup;
  os << "problem " << rec.problem << ", p = " << s.degree << ", mode "
     << to_string(s.adapt.mode) << ", estimator "
     << (s.adapt.estimator == MajorantKind::eta1 ? "eta1" : "eta2") << ", sigma "
     << s.adapt.sigma << ", chi " << s.adapt.chi << '\n';
  os << "levels " << rec.levels.size();
  if (!rec.levels.empty()) os << ", final N_h " << rec.levels.back().num_dofs;
  os << ", FGMRES iterations " << rec.total_iterations() << '\n';
  if (rec.levels.size() >= 3 && rec.levels.front().error_h >= 0.0) {
    os << "rate (last 3 levels, N_h^(-1/" << rec.dim << ")): error_h " << report.rate
       << ", triple norm " << report.rate_triple << '\n';
    os << "efficiency index range [" << report.eff_min << ", " << report.eff_max << "]\n";
  } else if (rec.levels.size() < 3) {
    os << "rate: fewer than 3 levels\n";
  }
  if (!rec.failure.empty()) os << "aborted: " << rec.failure << '\n';
}

void write_indicator_csv(std::ostream& os, const FeSpace& space, const IndicatorField& ind) {
  const int D = space.dim();
  os << "element,eta2";
  for (int a = 0; a < D; ++a) os << ",E" << a;
  os << '\n';
  const auto old = os.precision(12);
  for (int e = 0; e < space.num_elements(); ++e) {
    os << space.brick_id(e) << ',' << ind.eta2[e];
    for (int a = 0; a < D; ++a) {
      os << ',' << (static_cast<std::size_t>(e) < ind.anisotropy.size() ? ind.anisotropy[e][a] : 0.0);
    }
    os << '\n';
  }
  os.precision(old);
}

}  // namespace stfem
