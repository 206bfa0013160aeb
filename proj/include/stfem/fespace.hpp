#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "stfem/mesh.hpp"
#include "stfem/quadrature.hpp"
#include "stfem/shapes.hpp"

namespace stfem {

/// Boundary pieces of the space-time cylinder, usable as a bitmask.
enum BoundaryPart : unsigned {
  kLateral = 1u,   // Sigma = dOmega x (0, T), including a slit facet
  kInitial = 2u,   // Sigma_0 = Omega x {0}
  kTerminal = 4u,  // Sigma_T = Omega x {T}
};

using ScalarFunction = std::function<double(const Point&)>;

/// Prescribed values on Sigma and Sigma_0. An empty trace means homogeneous data.
struct BoundaryDataSpec {
  ScalarFunction trace;
};

/// One term of a constraint row: full DOF value += weight * true_dof.
struct ConstraintEntry {
  int true_dof;
  double weight;
};

/// Continuous Q_p nodal space on a brick mesh. Full DOFs are the nodes of all active
/// bricks; hanging nodes are constrained by interpolation from the coarse side, the
/// remaining nodes are the true DOFs. True DOFs are numbered by position with time slowest.
/// With `cut_slit`, nodes strictly inside a slit facet are duplicated per side, so
/// functions may jump across the slit (used for fluxes on cut domains).
class FeSpace {
 public:
  FeSpace(std::shared_ptr<const BrickMesh> mesh, int degree, bool cut_slit = false);

  const BrickMesh& mesh() const { return *mesh_; }
  std::shared_ptr<const BrickMesh> mesh_ptr() const { return mesh_; }
  const ShapeSet& shapes() const { return shapes_; }
  int degree() const { return shapes_.degree(); }
  int dim() const { return mesh_->dim(); }
  int nodes_per_element() const { return nodes_per_element_; }
  bool cut_slit() const { return cut_slit_; }

  int num_elements() const { return static_cast<int>(elements_.size()); }
  int brick_id(int e) const { return elements_[e]; }
  /// Element index of an active brick id, -1 otherwise.
  int element_of_brick(int brick) const;
  std::span<const int> element_nodes(int e) const {
    return {element_nodes_.data() + static_cast<std::size_t>(e) * nodes_per_element_,
            static_cast<std::size_t>(nodes_per_element_)};
  }

  int num_nodes() const { return static_cast<int>(positions_.size()); }
  int num_true() const { return static_cast<int>(true_nodes_.size()); }
  int num_hanging() const { return num_nodes() - num_true(); }
  const Point& node_position(int node) const { return positions_[node]; }
  bool is_hanging(int node) const { return true_index_[node] < 0; }
  int true_index(int node) const { return true_index_[node]; }
  int node_of_true(int i) const { return true_nodes_[i]; }
  std::span<const ConstraintEntry> constraint(int node) const {
    return {constraint_entries_.data() + constraint_ptr_[node],
            static_cast<std::size_t>(constraint_ptr_[node + 1] - constraint_ptr_[node])};
  }

  /// Full nodal values C * u for true coefficients u.
  std::vector<double> expand(std::span<const double> true_coeffs) const;
  /// Local coefficients of element e from full nodal values.
  void gather(int e, std::span<const double> full, std::span<double> local) const;

  /// Per true DOF: 1 if the node lies on any of the requested boundary parts.
  std::vector<char> boundary_mask(unsigned parts) const;

  /// Essential DOFs (Sigma and Sigma_0) and their prescribed values.
  const std::vector<char>& essential() const { return essential_; }
  const std::vector<double>& essential_values() const { return essential_values_; }
  int num_essential() const;
  void set_boundary_data(const BoundaryDataSpec& bc);

  /// True when the node position lies on the slit facet (if any).
  bool on_slit(const Point& x) const;

 private:
  struct AxisKey {
    Lattice a;
    Lattice b;
    int k;
  };

  std::shared_ptr<const BrickMesh> mesh_;
  ShapeSet shapes_;
  bool cut_slit_ = false;
  int nodes_per_element_ = 0;
  std::vector<int> elements_;
  std::vector<int> element_index_;
  std::vector<int> element_nodes_;
  std::vector<Point> positions_;
  std::vector<std::array<AxisKey, kMaxDim>> keys_;
  std::vector<std::int8_t> side_;  // -1, or which side of the slit a cut node belongs to
  std::vector<int> true_index_;
  std::vector<int> true_nodes_;
  std::vector<int> constraint_ptr_;
  std::vector<ConstraintEntry> constraint_entries_;
  std::vector<char> essential_;
  std::vector<double> essential_values_;

  void number_nodes();
  void build_constraints();
};

/// Builds the space and marks essential DOFs on Sigma and Sigma_0 with values from bc.
FeSpace build_space(std::shared_ptr<const BrickMesh> mesh, int degree,
                    const BoundaryDataSpec& bc = {});

/// Nodal interpolant (true coefficients) of g.
std::vector<double> interpolate(const FeSpace& space, const ScalarFunction& g);

/// Nodal interpolation of a coarse-space function onto a space whose mesh refines it.
std::vector<double> prolongate(const FeSpace& coarse, std::span<const double> u_coarse,
                               const FeSpace& fine);

/// Basis values and reference derivatives tabulated at the points of a quadrature rule.
/// Physical derivatives are obtained by dividing by the brick sizes.
struct Tabulation {
  int dim = 0;
  int num_points = 0;
  int num_basis = 0;
  std::vector<double> value;                  // [q * nb + i]
  std::array<std::vector<double>, kMaxDim> d1;  // reference first derivatives
  std::array<std::vector<double>, kMaxDim> d2;  // reference second derivatives

  double v(int q, int i) const { return value[q * num_basis + i]; }
  double dv(int a, int q, int i) const { return d1[a][q * num_basis + i]; }
  double ddv(int a, int q, int i) const { return d2[a][q * num_basis + i]; }
};

Tabulation tabulate(const ShapeSet& shapes, int dim, std::span<const Point> ref_points);

/// Value, gradient (all dim axes, time last) and pure second derivatives of a local
/// expansion at one reference point of a brick.
struct PointValues {
  double value = 0.0;
  Point grad{};
  Point second{};
};

PointValues evaluate_local(const ShapeSet& shapes, int dim, const Brick& brick,
                           std::span<const double> local, const Point& ref);

/// Evaluates a finite element function given by full nodal values at a physical point.
PointValues evaluate_at(const FeSpace& space, std::span<const double> full, const Point& x);

/// Physical point of a reference point in a brick.
inline Point map_to_brick(const Brick& b, const Point& ref) {
  Point x{};
  for (int a = 0; a < b.dim; ++a) x[a] = b.anchor[a] + b.sizes[a] * ref[a];
  return x;
}

}  // namespace stfem
