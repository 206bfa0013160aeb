#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "stfem/assembly.hpp"
#include "stfem/estimator.hpp"
#include "stfem/fespace.hpp"
#include "stfem/mesh.hpp"
#include "stfem/problem.hpp"
#include "stfem/solver.hpp"

namespace stfem {

enum class RefinementMode { uniform, isotropic, anisotropic };

RefinementMode parse_refinement_mode(const std::string& name);
std::string to_string(RefinementMode mode);

struct AdaptConfig {
  double sigma = 0.25;
  double chi = 0.1;
  RefinementMode mode = RefinementMode::anisotropic;
  long max_dofs = 2'000'000;
  int max_levels = 10;
  MajorantKind estimator = MajorantKind::eta1;
  /// Warm starts from the previous level with the relaxed inner tolerance.
  bool nested = true;
  double rtol_coarse = 1e-8;
  double rtol_inner = 1e-2;

  /// Throws ErrorKind::parameter unless sigma, chi in (0, 1) and the caps are positive.
  void validate() const;
};

/// Greedy bulk marking: element indices by descending eta2 (stable by index) until the
/// selected sum reaches sigma times the total. Non-positive entries are never marked.
std::vector<int> doerfler_mark(std::span<const double> eta2, double sigma);

/// Axes bitmask {i : E_i > chi |E|} over the first `dim` entries; all axes when empty.
unsigned directive_axes(const Point& e_k, int dim, double chi);

/// Directives for marked elements (element indices of `space`).
std::vector<RefinementDirective> refinement_directives(const FeSpace& space,
                                                       std::span<const int> marked,
                                                       std::span<const Point> anisotropy,
                                                       double chi, RefinementMode mode);

/// Removes axes that already reached the lattice depth limit; directives left without
/// axes are dropped.
std::vector<RefinementDirective> drop_saturated_axes(const BrickMesh& mesh,
                                                     std::span<const RefinementDirective> in);

struct LevelRecord {
  int level = 0;
  int num_dofs = 0;  // N_h, true DOFs including essential ones
  int num_elements = 0;
  double error_h = -1.0;         // ||u - u_h||_h, -1 without exact solution
  double triple_error = -1.0;    // |||u - u_h||| with the estimator's weights
  double majorant = 0.0;         // total of the chosen majorant (squared quantity)
  double eff_index = -1.0;       // sqrt(majorant) / triple_error
  int iterations = 0;
  double wall_time = 0.0;
  double initial_residual = 0.0;
  double final_residual = 0.0;
  int marked = 0;
};

struct StudyRecord {
  std::string problem;
  int dim = 0;
  std::vector<LevelRecord> levels;
  bool completed = false;
  std::string failure;      // set when the loop aborted
  std::string stop_reason;  // why a completed study ended

  int total_iterations() const;
};

/// Everything needed to run one adaptive study besides the problem.
struct StudySetup {
  int degree = 1;
  std::vector<int> initial_cells;
  StabilizationParams stabilization;
  QuadraturePolicy quadrature;
  SolverConfig solver;
  EstimatorConfig estimator;
  AdaptConfig adapt;
};

/// Per-level hook (mesh dumps, indicator export). Called after estimation.
struct LevelView {
  const LevelRecord& record;
  const FeSpace& space;
  std::span<const double> solution;
  const MajorantResult& estimate;
};
using LevelCallback = std::function<void(const LevelView&)>;

/// assemble -> solve -> estimate -> mark -> refine until max_levels, or until the next
/// space would exceed max_dofs. Solver failures end the study with a partial record.
StudyRecord adaptive_loop(const ProblemSpec& problem, const StudySetup& setup,
                          const LevelCallback& on_level = {});

/// CSV with the columns level,N_h,error_h,triple_norm_error,majorant,eff_index,iterations,wall_time.
void write_study_csv(std::ostream& os, const StudyRecord& study);

/// Least-squares slope of log(error) against log(N_h^{-1/(d+1)}) over the last `count`
/// levels; `use_triple` selects the triple-norm error column.
double convergence_rate(const StudyRecord& study, int count = 3, bool use_triple = false);

/// Slope of log(y) against log(x).
double least_squares_slope(std::span<const double> x, std::span<const double> y);

}  // namespace stfem
