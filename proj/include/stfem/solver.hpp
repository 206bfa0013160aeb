#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "stfem/assembly.hpp"
#include "stfem/fespace.hpp"
#include "stfem/sparse.hpp"

namespace stfem {

/// z = M^{-1} r. Implementations must be deterministic.
class Preconditioner {
 public:
  virtual ~Preconditioner() = default;
  virtual void apply(std::span<const double> r, std::span<double> z) const = 0;
};

enum class PreconditionerKind {
  identity,
  jacobi,
  gauss_seidel,
  symmetric_gauss_seidel,
  block_jacobi_time,
  sparse_lu,  // direct factorization, for small or badly conditioned systems
};

PreconditionerKind parse_preconditioner(const std::string& name);
std::string to_string(PreconditionerKind kind);

/// `blocks` assigns every row to a block; it is only read by block_jacobi_time.
std::unique_ptr<Preconditioner> make_preconditioner(const CsrMatrix& a, PreconditionerKind kind,
                                                    std::span<const int> blocks = {});

/// Groups the free DOFs of a system by the time coordinate of their node.
std::vector<int> time_layer_blocks(const FeSpace& space, const LinearSystem& system);

struct SolveStats {
  int iterations = 0;
  double initial_residual = 0.0;
  double final_residual = 0.0;
  double seconds = 0.0;
  bool converged = false;
  bool stagnated = false;
  /// Residual norm after every iteration (GMRES estimate, equal to the true residual
  /// of the current iterate in exact arithmetic).
  std::vector<double> history;
};

struct FgmresOptions {
  double rtol = 1e-8;
  int restart = 50;
  int max_iterations = 10000;
};

struct FgmresResult {
  std::vector<double> x;
  SolveStats stats;
};

/// Flexible GMRES with right preconditioning, modified Gram-Schmidt and selective
/// reorthogonalization. Stops when ||b - A x|| <= rtol ||b - A x0||.
FgmresResult fgmres(const CsrMatrix& a, std::span<const double> b, std::span<const double> x0,
                    const Preconditioner& m, const FgmresOptions& options = {});

struct SolverConfig {
  PreconditionerKind preconditioner = PreconditionerKind::symmetric_gauss_seidel;
  FgmresOptions fgmres;
};

/// Solves one assembled system from the given free-DOF initial guess (zero when empty)
/// and returns true coefficients including essential values.
std::vector<double> solve_system(const FeSpace& space, const LinearSystem& system,
                                 const SolverConfig& config, std::span<const double> x0,
                                 SolveStats* stats = nullptr);

struct NestedLevel {
  const FeSpace* space;
  const LinearSystem* system;
};

struct NestedResult {
  std::vector<double> solution;  // true coefficients on the finest level
  std::vector<SolveStats> stats;
};

/// Level 0 from a zero guess to rtol_coarse; every finer level starts from the prolongated
/// previous solution and stops at rtol_inner.
NestedResult nested_solve(std::span<const NestedLevel> levels, double rtol_coarse,
                          double rtol_inner, const SolverConfig& config = {});

}  // namespace stfem
