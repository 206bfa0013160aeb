#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "stfem/adaptivity.hpp"
#include "stfem/config.hpp"

namespace stfem {

struct RateSeries {
  std::vector<double> h;           // the varied mesh size
  std::vector<double> error;       // ||u - u_h||_h
  std::vector<double> error_star;  // ||u - u_h||_{h,*}
  double slope = 0.0;              // least-squares over all points
  double slope_star = 0.0;
};

struct AnisotropicRateOptions {
  int degree = 1;
  int fine_cells = 1024;              // cells along the fixed axis
  std::vector<int> coarse_cells{4, 8, 16, 32};  // cells along the varied axis
  StabilizationParams stabilization;
  /// Smoother-based preconditioners fail on the extreme aspect ratios (h_t << h_x makes
  /// the time coupling dominate the diagonal), so the study factorizes directly.
  SolverConfig solver{PreconditionerKind::sparse_lu, {}};
};

struct AnisotropicRateReport {
  RateSeries in_t;  // fine h_x, varying h_t
  RateSeries in_x;  // fine h_t, varying h_x
};

/// Error against h_t at fixed fine h_x and against h_x at fixed fine h_t on tensor
/// meshes of a d = 1 problem with known solution.
AnisotropicRateReport anisotropic_rate_study(const ProblemSpec& problem,
                                             const AnisotropicRateOptions& options = {});

struct TensorMeshError {
  double h = 0.0;       // ||u - u_h||_h
  double h_star = 0.0;  // ||u - u_h||_{h,*}
};

/// Errors on one tensor mesh with the given cells per axis, solved to 1e-10.
TensorMeshError tensor_mesh_error(const ProblemSpec& problem, std::span<const int> cells,
                                  int degree, const StabilizationParams& stab = {},
                                  const SolverConfig& solver = {});

struct StudyReport {
  StudyRecord record;
  double rate = 0.0;          // ||.||_h, last three levels; 0 when not computable
  double rate_triple = 0.0;   // triple norm, last three levels
  double eff_min = 0.0;
  double eff_max = 0.0;
};

StudyReport summarize(StudyRecord record);
StudyReport run_study(const StudyConfig& config, const LevelCallback& on_level = {});

/// Human-readable summary: rates, efficiency range and iteration totals.
void write_summary(std::ostream& os, const StudyConfig& config, const StudyReport& report);

/// CSV rows element,eta2,E_0..E_{dim-1} with brick ids as element ids.
void write_indicator_csv(std::ostream& os, const FeSpace& space, const IndicatorField& ind);

}  // namespace stfem
