#pragma once

#include <vector>

namespace stfem {

/// Lagrange basis of degree p on [0, 1] at Gauss-Lobatto nodes.
class ShapeSet {
 public:
  explicit ShapeSet(int degree);

  int degree() const { return p_; }
  int size() const { return p_ + 1; }
  const std::vector<double>& nodes() const { return nodes_; }

  /// Values, first and second derivatives of all p+1 basis functions at s. Any of the
  /// output pointers may be null.
  void eval(double s, double* value, double* d1, double* d2) const;

 private:
  int p_;
  std::vector<double> nodes_;
  std::vector<double> denom_;
};

/// Gauss-Lobatto nodes on [0, 1] (endpoints included), ascending.
std::vector<double> gauss_lobatto_nodes(int degree);

}  // namespace stfem
