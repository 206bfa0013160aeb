#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "stfem/assembly.hpp"
#include "stfem/fespace.hpp"
#include "stfem/problem.hpp"

namespace stfem {

/// Parameters of the functional majorants. The constructor-like `make` and `validate`
/// enforce delta in (0, 2], mu in (0, 1), beta > mu, gamma > 1 and c_f > 0.
struct MajorantParams {
  double delta = 1.0;
  double beta = 1.0;
  double mu = 0.5;
  double gamma = 2.0;
  double c_f = 1.0;

  void validate() const;
  static MajorantParams make(double delta, double beta, double mu, double gamma, double c_f);
  /// Defaults with c_f taken from the problem's spatial bounding box.
  static MajorantParams defaults_for(const ProblemSpec& problem);
};

/// Componentwise Q_p flux on a space over the same mesh as u_h, continuous except across a
/// slit. Component a occupies coeffs[a * num_true, (a + 1) * num_true).
struct FluxField {
  std::shared_ptr<const FeSpace> space;
  int components = 0;
  std::vector<double> coeffs;

  std::span<const double> component(int a) const {
    const std::size_t n = static_cast<std::size_t>(space->num_true());
    return {coeffs.data() + a * n, n};
  }
};

/// Per-element squared indicators (signed for the second majorant) and anisotropy vectors.
struct IndicatorField {
  std::vector<double> eta2;
  std::vector<Point> anisotropy;  // first dim entries used, time last
  double total = 0.0;

  /// max(eta2_K, 0), the values used for marking.
  std::vector<double> marking_values() const;
};

/// Value at local node l of element e (lexicographic local numbering).
using ElementNodeFunction = std::function<double(int e, const Brick& b, int l)>;

/// Volume-weighted average over the elements sharing each true node. Hanging nodes follow
/// from the constraints when the result is expanded.
std::vector<double> nodal_average(const FeSpace& space, const ElementNodeFunction& field);

/// R_h(nu d_axis u_h) as true coefficients of `target` (a space on the same mesh and
/// degree, `space` itself when null); `scale_by_nu` false recovers d_axis u_h.
std::vector<double> recover_derivative(const FeSpace& space, const ProblemSpec& problem,
                                       std::span<const double> u, int axis, bool scale_by_nu,
                                       const FeSpace* target = nullptr);

/// Space for fluxes belonging to the u_h space: same mesh and degree, cut along a slit.
std::shared_ptr<const FeSpace> make_flux_space(const FeSpace& space);

/// y0 = R_h(nu grad_x u_h). Without `flux_space` one is made by make_flux_space.
FluxField recover_flux(const FeSpace& space, const ProblemSpec& problem,
                       std::span<const double> u,
                       std::shared_ptr<const FeSpace> flux_space = nullptr);

/// Elementwise eta_1,K^2. The total bounds |||u - u_h|||^2 with weights (1, 2 - delta).
IndicatorField majorant1(const FeSpace& space, const ProblemSpec& problem,
                         std::span<const double> u, const FluxField& y,
                         const MajorantParams& params, const QuadraturePolicy& policy = {});

/// Elementwise eta_2,K^2 with the free function theta (zero on the lateral boundary). The
/// terminal-face term is assigned to elements whose top face lies on Sigma_T. The total
/// bounds |||u - u_h|||^2 with weights (1 - 1/gamma, 2 - delta).
IndicatorField majorant2(const FeSpace& space, const ProblemSpec& problem,
                         std::span<const double> u, const FluxField& y,
                         std::span<const double> theta, const MajorantParams& params,
                         const QuadraturePolicy& policy = {});

/// Minimizer of (1 + beta) D^2 + (1 + beta) / beta R^2 over beta > mu.
double optimal_beta(double d, double r, double mu, double current);

struct MinimizeOptions {
  int outer = 5;     // alternations of beta update and CG sweep
  int cg_steps = 5;  // CG iterations per sweep
  /// Diagonally scaled CG instead of the Euclidean inner product.
  bool jacobi = false;
  /// Solve every sweep to convergence: CG preconditioned by a sparse Cholesky factor of
  /// the current sweep's matrix (cg_steps and jacobi are then ignored).
  bool direct = false;
  /// Stop early once an alternation lowers the total by less than rtol times its value
  /// (0 runs all `outer` alternations).
  double rtol = 0.0;
};

struct MajorantResult {
  FluxField y;
  std::vector<double> theta;  // empty for the first majorant
  MajorantParams params;      // with the final beta
  IndicatorField indicators;
  std::vector<double> history;  // total after the start and after every update
};

/// Starts from y0 = R_h(nu grad_x u_h) and alternates closed-form beta updates with CG
/// sweeps on the flux. The recorded totals never increase.
MajorantResult minimize_majorant1(const FeSpace& space, const ProblemSpec& problem,
                                  std::span<const double> u, const MajorantParams& params,
                                  const MinimizeOptions& options = {},
                                  const QuadraturePolicy& policy = {});

/// As above for the second majorant: each alternation updates beta, then theta, then y.
MajorantResult minimize_majorant2(const FeSpace& space, const ProblemSpec& problem,
                                  std::span<const double> u, const MajorantParams& params,
                                  const MinimizeOptions& options = {},
                                  const QuadraturePolicy& policy = {});

/// E_K with (E_i)^2 = int_K (y_i - nu d_i u_h)^2 for space axes and
/// (E_t)^2 = int_K (R_h(dt u_h) - dt u_h)^2, for every element.
std::vector<Point> anisotropy_vectors(const FeSpace& space, const ProblemSpec& problem,
                                      std::span<const double> u, const FluxField& y,
                                      const QuadraturePolicy& policy = {});

enum class MajorantKind { eta1, eta2 };

struct EstimatorConfig {
  MajorantKind kind = MajorantKind::eta1;
  MinimizeOptions minimize;
  /// Non-positive means the problem's default Friedrichs constant.
  double c_f = 0.0;
  double delta = 1.0;
  double beta = 1.0;
  double mu = 0.5;
  double gamma = 2.0;
};

/// Minimizes the chosen majorant and fills the anisotropy vectors.
MajorantResult estimate(const FeSpace& space, const ProblemSpec& problem,
                        std::span<const double> u, const EstimatorConfig& config,
                        const QuadraturePolicy& policy = {});

}  // namespace stfem
