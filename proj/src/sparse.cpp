#include "stfem/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

#include "stfem/common.hpp"

namespace stfem {

void CsrMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  for (int r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) s += val[k] * x[col[k]];
    y[r] = s;
  }
}

std::vector<double> CsrMatrix::operator*(std::span<const double> x) const {
  std::vector<double> y(rows);
  multiply(x, y);
  return y;
}

std::vector<double> CsrMatrix::diagonal() const {
  std::vector<double> d(rows, 0.0);
  for (int r = 0; r < rows; ++r) {
    const int k = find(r, r);
    if (k >= 0) d[r] = val[k];
  }
  return d;
}

int CsrMatrix::find(int r, int c) const {
  const auto first = col.begin() + row_ptr[r];
  const auto last = col.begin() + row_ptr[r + 1];
  const auto it = std::lower_bound(first, last, c);
  if (it == last || *it != c) return -1;
  return static_cast<int>(it - col.begin());
}

double CsrMatrix::at(int r, int c) const {
  const int k = find(r, c);
  return k < 0 ? 0.0 : val[k];
}

CsrMatrix CsrMatrix::identity(int n) {
  CsrMatrix a;
  a.rows = a.cols = n;
  a.row_ptr.resize(n + 1);
  std::iota(a.row_ptr.begin(), a.row_ptr.end(), 0);
  a.col.resize(n);
  std::iota(a.col.begin(), a.col.end(), 0);
  a.val.assign(n, 1.0);
  return a;
}

CsrMatrix CsrMatrix::from_triplets(int rows, int cols, std::span<const int> ri,
                                   std::span<const int> ci, std::span<const double> v) {
  require(ri.size() == ci.size() && ci.size() == v.size(), ErrorKind::invalid_argument,
          "triplet arrays differ in length");
  std::vector<std::size_t> order(ri.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ri[a] != ri[b] ? ri[a] < ri[b] : ci[a] < ci[b];
  });
  CsrMatrix a;
  a.rows = rows;
  a.cols = cols;
  a.row_ptr.assign(rows + 1, 0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t t = order[k];
    require(ri[t] >= 0 && ri[t] < rows && ci[t] >= 0 && ci[t] < cols,
            ErrorKind::invalid_argument, "triplet index out of range");
    if (!a.col.empty() && k > 0 && ri[order[k - 1]] == ri[t] && ci[order[k - 1]] == ci[t]) {
      a.val.back() += v[t];
      continue;
    }
    a.col.push_back(ci[t]);
    a.val.push_back(v[t]);
    ++a.row_ptr[ri[t] + 1];
  }
  for (int r = 0; r < rows; ++r) a.row_ptr[r + 1] += a.row_ptr[r];
  return a;
}

void write_matrix_market(std::ostream& os, const CsrMatrix& a) {
  const auto prec = os.precision();
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << a.rows << ' ' << a.cols << ' ' << a.nnz() << '\n';
  os << std::setprecision(17);
  for (int r = 0; r < a.rows; ++r) {
    for (int k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
      os << r + 1 << ' ' << a.col[k] + 1 << ' ' << a.val[k] << '\n';
    }
  }
  os.precision(prec);
}

double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace stfem
