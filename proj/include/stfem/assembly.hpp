#pragma once

#include <map>
#include <memory>
#include <span>
#include <vector>

#include "stfem/fespace.hpp"
#include "stfem/problem.hpp"
#include "stfem/quadrature.hpp"
#include "stfem/sparse.hpp"

namespace stfem {

/// theta_K = theta0 * h_K, so the upwind weight theta_K h_K = theta0 h_K^2.
struct StabilizationParams {
  double theta0 = 0.5;
  HkConvention convention = HkConvention::temporal;

  double h_k(const Brick& b) const { return element_sizes(b, convention).h_K; }
  double theta_k(const Brick& b) const { return theta0 * h_k(b); }
  double weight(const Brick& b) const { return theta_k(b) * h_k(b); }
};

struct DenseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}
  double& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }
};

/// A quadrature rule together with the basis tabulated at its points.
struct QuadPoints {
  QuadratureRule rule;
  Tabulation tab;
  /// Measure factor: 1 for volume rules; for face rules the face lies at ref[axis] = 1.
  bool top_face = false;
};

/// Lazily built volume and terminal-face rules for one shape set.
class QuadratureTable {
 public:
  QuadratureTable(const ShapeSet& shapes, int dim) : shapes_(shapes), dim_(dim) {}
  const QuadPoints& volume(int points_per_axis, int pieces = 1);
  /// Rule on the face t_ref = 1 (time is the last axis); weights integrate over the face.
  const QuadPoints& top_face(int points_per_axis, int pieces = 1);

 private:
  ShapeSet shapes_;
  int dim_;
  std::map<std::pair<int, int>, std::unique_ptr<QuadPoints>> volume_;
  std::map<std::pair<int, int>, std::unique_ptr<QuadPoints>> face_;
};

/// Quadrature points per axis for a brick: p + 1 by default, raised for variable nu and
/// for bricks flagged singular by the problem.
struct QuadraturePolicy {
  int extra = 0;
  int singular_extra = 2;
  int singular_pieces = 1;

  int points(const ProblemSpec& problem, const Brick& b, int degree) const;
  int pieces(const ProblemSpec& problem, const Brick& b) const;
  /// Two more points per axis, for errors against exact solutions.
  QuadraturePolicy for_errors() const {
    QuadraturePolicy q = *this;
    q.extra += 2;
    return q;
  }
};

/// Local matrix of the upwind-stabilized space-time form on one brick, rows = test functions:
/// int_K dt u v + theta_K h_K dt u dt v + nu grad_x u . grad_x v - theta_K h_K div_x(nu grad_x u) dt v.
DenseMatrix element_matrix(const Brick& brick, const Coefficient& nu, double theta_k, double h_k,
                           const ShapeSet& shapes, const QuadratureRule& quad);

/// Local load vector int_K f v + theta_K h_K f dt v.
std::vector<double> element_load(const Brick& brick, const ScalarFunction& f, double theta_k,
                                 double h_k, const ShapeSet& shapes, const QuadratureRule& quad);

/// Reduced system over the free (true, non-essential) DOFs.
struct LinearSystem {
  CsrMatrix matrix;
  std::vector<double> rhs;
  std::vector<int> free_to_true;
  std::vector<int> true_to_free;
  int num_true = 0;

  int size() const { return matrix.rows; }
  /// Full true coefficient vector from a free solution plus the essential values.
  std::vector<double> to_true(const FeSpace& space, std::span<const double> free_values) const;
  std::vector<double> restrict_to_free(std::span<const double> true_values) const;
};

LinearSystem assemble(const FeSpace& space, const ProblemSpec& problem,
                      const StabilizationParams& stab, const QuadraturePolicy& policy = {});

/// Sums constrained element contributions C^T A_e C into a sparse matrix over a selected
/// set of DOFs. A DOF is (component, true index); `index` maps it to a row or -1 (eliminated).
/// Element matrices are ordered [component * nodes_per_element + local node].
class ConstrainedAssembler {
 public:
  ConstrainedAssembler(const FeSpace& space, int components, std::vector<int> index, int n);

  int size() const { return n_; }
  /// Adds a local matrix (may be empty) and local vector (may be empty). Columns that
  /// are eliminated contribute -A_ij * lift[dof] to the vector when `lift` is non-empty.
  void add(int e, std::span<const double> local_matrix, std::span<const double> local_vector,
           std::span<const double> lift = {});

  const CsrMatrix& matrix() const { return matrix_; }
  /// Zeros the accumulated values, keeping the sparsity pattern.
  void reset_values();
  CsrMatrix take_matrix();
  std::vector<double> take_vector() { return std::move(vector_); }

 private:
  struct Term {
    int row;   // -1 when eliminated
    int dof;   // component * num_true + true index
    double weight;
  };
  void expand(int e);

  const FeSpace& space_;
  int components_;
  std::vector<int> index_;
  int n_;
  CsrMatrix matrix_;
  std::vector<double> vector_;
  std::vector<Term> terms_;
  std::vector<int> term_ptr_;
};

}  // namespace stfem
