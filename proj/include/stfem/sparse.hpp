#pragma once

#include <iosfwd>
#include <span>
#include <vector>

namespace stfem {

/// Compressed sparse row matrix with sorted column indices in every row.
struct CsrMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<int> row_ptr{0};
  std::vector<int> col;
  std::vector<double> val;

  int nnz() const { return static_cast<int>(col.size()); }
  /// y = A x
  void multiply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> operator*(std::span<const double> x) const;
  std::vector<double> diagonal() const;
  /// Position of (r, c) in col/val, or -1.
  int find(int r, int c) const;
  double at(int r, int c) const;

  static CsrMatrix identity(int n);
  /// Builds from (row, col, value) triplets, summing duplicates.
  static CsrMatrix from_triplets(int rows, int cols, std::span<const int> ri,
                                 std::span<const int> ci, std::span<const double> v);
};

/// MatrixMarket coordinate real general format.
void write_matrix_market(std::ostream& os, const CsrMatrix& a);

double dot(std::span<const double> x, std::span<const double> y);
double norm2(std::span<const double> x);
/// y += alpha x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

}  // namespace stfem
