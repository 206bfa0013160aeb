#include "stfem/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace stfem {

const QuadPoints& QuadratureTable::volume(int points_per_axis, int pieces) {
  auto& slot = volume_[{points_per_axis, pieces}];
  if (!slot) {
    slot = std::make_unique<QuadPoints>();
    slot->rule = composite_rule(dim_, points_per_axis, pieces);
    slot->tab = tabulate(shapes_, dim_, slot->rule.points);
  }
  return *slot;
}

const QuadPoints& QuadratureTable::top_face(int points_per_axis, int pieces) {
  auto& slot = face_[{points_per_axis, pieces}];
  if (!slot) {
    slot = std::make_unique<QuadPoints>();
    const QuadratureRule face = composite_rule(dim_ - 1, points_per_axis, pieces);
    slot->rule.dim = dim_;
    slot->rule.order = points_per_axis;
    slot->rule.weights = face.weights;
    for (const Point& p : face.points) {
      Point x = p;
      x[dim_ - 1] = 1.0;
      slot->rule.points.push_back(x);
    }
    slot->tab = tabulate(shapes_, dim_, slot->rule.points);
    slot->top_face = true;
  }
  return *slot;
}

int QuadraturePolicy::points(const ProblemSpec& problem, const Brick& b, int degree) const {
  int q = degree + 1 + extra;
  if (!problem.nu.is_constant()) q += 1;
  if (problem.is_singular(b)) q += singular_extra;
  return q;
}

int QuadraturePolicy::pieces(const ProblemSpec& problem, const Brick& b) const {
  return problem.is_singular(b) ? singular_pieces : 1;
}

namespace {

DenseMatrix element_matrix_tab(const Brick& brick, const Coefficient& nu, double s,
                               const QuadratureRule& rule, const Tabulation& tab) {
  const int D = brick.dim;
  const int ta = D - 1;
  const int nb = tab.num_basis;
  DenseMatrix A(nb, nb);
  const double vol = brick.volume();
  std::vector<double> phi(nb), dt(nb), lap(nb), tmp(nb);
  std::array<std::vector<double>, kMaxDim> dx;
  for (int a = 0; a < ta; ++a) dx[a].resize(nb);
  for (int q = 0; q < rule.size(); ++q) {
    const Point x = map_to_brick(brick, rule.points[q]);
    const double nq = nu(x);
    require(nq > 0.0, ErrorKind::coefficient, "diffusion coefficient must be positive");
    const Point gnu = nu.is_constant() ? Point{} : nu.gradient(x);
    const double w = rule.weights[q] * vol;
    for (int i = 0; i < nb; ++i) {
      phi[i] = tab.v(q, i);
      dt[i] = tab.dv(ta, q, i) / brick.sizes[ta];
      double l = 0.0;
      for (int a = 0; a < ta; ++a) {
        dx[a][i] = tab.dv(a, q, i) / brick.sizes[a];
        l += nq * tab.ddv(a, q, i) / (brick.sizes[a] * brick.sizes[a]) + gnu[a] * dx[a][i];
      }
      lap[i] = l;
      tmp[i] = s * (dt[i] - l);
    }
    // A_ij += w [phi_i dt_j + dt_i s (dt_j - L_j) + nu grad_x phi_i . grad_x phi_j]
    for (int i = 0; i < nb; ++i) {
      double* row = &A.data[static_cast<std::size_t>(i) * nb];
      const double a1 = w * phi[i];
      const double a2 = w * dt[i];
      for (int j = 0; j < nb; ++j) row[j] += a1 * dt[j] + a2 * tmp[j];
      for (int a = 0; a < ta; ++a) {
        const double a3 = w * nq * dx[a][i];
        const double* dxa = dx[a].data();
        for (int j = 0; j < nb; ++j) row[j] += a3 * dxa[j];
      }
    }
  }
  return A;
}

std::vector<double> element_load_tab(const Brick& brick, const ScalarFunction& f, double s,
                                     const QuadratureRule& rule, const Tabulation& tab) {
  const int ta = brick.dim - 1;
  const int nb = tab.num_basis;
  std::vector<double> b(nb, 0.0);
  if (!f) return b;
  const double vol = brick.volume();
  for (int q = 0; q < rule.size(); ++q) {
    const double fq = f(map_to_brick(brick, rule.points[q]));
    if (fq == 0.0) continue;
    const double w = rule.weights[q] * vol * fq;
    for (int i = 0; i < nb; ++i) {
      b[i] += w * (tab.v(q, i) + s * tab.dv(ta, q, i) / brick.sizes[ta]);
    }
  }
  return b;
}

}  // namespace

DenseMatrix element_matrix(const Brick& brick, const Coefficient& nu, double theta_k, double h_k,
                           const ShapeSet& shapes, const QuadratureRule& quad) {
  const Tabulation tab = tabulate(shapes, brick.dim, quad.points);
  return element_matrix_tab(brick, nu, theta_k * h_k, quad, tab);
}

std::vector<double> element_load(const Brick& brick, const ScalarFunction& f, double theta_k,
                                 double h_k, const ShapeSet& shapes, const QuadratureRule& quad) {
  const Tabulation tab = tabulate(shapes, brick.dim, quad.points);
  return element_load_tab(brick, f, theta_k * h_k, quad, tab);
}

std::vector<double> LinearSystem::to_true(const FeSpace& space,
                                          std::span<const double> free_values) const {
  std::vector<double> u = space.essential_values();
  for (std::size_t k = 0; k < free_to_true.size(); ++k) u[free_to_true[k]] = free_values[k];
  return u;
}

std::vector<double> LinearSystem::restrict_to_free(std::span<const double> true_values) const {
  std::vector<double> r(free_to_true.size());
  for (std::size_t k = 0; k < free_to_true.size(); ++k) r[k] = true_values[free_to_true[k]];
  return r;
}

LinearSystem assemble(const FeSpace& space, const ProblemSpec& problem,
                      const StabilizationParams& stab, const QuadraturePolicy& policy) {
  LinearSystem sys;
  sys.num_true = space.num_true();
  sys.true_to_free.assign(space.num_true(), -1);
  const auto& ess = space.essential();
  for (int i = 0; i < space.num_true(); ++i) {
    if (!ess[i]) {
      sys.true_to_free[i] = static_cast<int>(sys.free_to_true.size());
      sys.free_to_true.push_back(i);
    }
  }
  const int n = static_cast<int>(sys.free_to_true.size());
  ConstrainedAssembler asmb(space, 1, sys.true_to_free, n);
  QuadratureTable table(space.shapes(), space.dim());

  // Constant nu: element matrices depend only on the brick sizes and the upwind weight.
  std::map<std::array<double, kMaxDim + 2>, DenseMatrix> cache;
  const int p = space.degree();
  for (int e = 0; e < space.num_elements(); ++e) {
    const Brick b = space.mesh().brick(space.brick_id(e));
    const double s = stab.weight(b);
    require(s > 0.0, ErrorKind::invalid_argument, "stabilization weight must be positive");
    const int qm = p + 1 + policy.extra + (problem.nu.is_constant() ? 0 : 1);
    const QuadPoints& mq = table.volume(qm);
    const QuadPoints& lq = table.volume(policy.points(problem, b, p), policy.pieces(problem, b));
    const DenseMatrix* A = nullptr;
    DenseMatrix local;
    if (problem.nu.is_constant()) {
      std::array<double, kMaxDim + 2> key{};
      for (int a = 0; a < b.dim; ++a) key[a] = b.sizes[a];
      key[kMaxDim] = s;
      key[kMaxDim + 1] = qm;
      auto it = cache.find(key);
      if (it == cache.end()) {
        it = cache.emplace(key, element_matrix_tab(b, problem.nu, s, mq.rule, mq.tab)).first;
      }
      A = &it->second;
    } else {
      local = element_matrix_tab(b, problem.nu, s, mq.rule, mq.tab);
      A = &local;
    }
    const std::vector<double> load = element_load_tab(b, problem.source, s, lq.rule, lq.tab);
    asmb.add(e, A->data, load, space.essential_values());
  }
  sys.matrix = asmb.take_matrix();
  sys.rhs = asmb.take_vector();
  return sys;
}

ConstrainedAssembler::ConstrainedAssembler(const FeSpace& space, int components,
                                           std::vector<int> index, int n)
    : space_(space), components_(components), index_(std::move(index)), n_(n) {
  require(static_cast<int>(index_.size()) == components * space.num_true(),
          ErrorKind::invalid_argument, "DOF index map has the wrong size");
  const int ne = space.num_elements();
  const int nloc = components_ * space.nodes_per_element();
  term_ptr_.assign(static_cast<std::size_t>(ne) * nloc + 1, 0);
  terms_.reserve(static_cast<std::size_t>(ne) * nloc * 5 / 4);
  for (int e = 0; e < ne; ++e) expand(e);

  // Sparsity: rows of each element, transposed to row -> elements, then column unions.
  std::vector<int> elem_ptr(ne + 1, 0);
  std::vector<int> elem_rows;
  std::vector<int> scratch;
  for (int e = 0; e < ne; ++e) {
    scratch.clear();
    const std::size_t base = static_cast<std::size_t>(e) * nloc;
    for (int k = term_ptr_[base]; k < term_ptr_[base + nloc]; ++k) {
      if (terms_[k].row >= 0) scratch.push_back(terms_[k].row);
    }
    std::sort(scratch.begin(), scratch.end());
    scratch.erase(std::unique(scratch.begin(), scratch.end()), scratch.end());
    elem_rows.insert(elem_rows.end(), scratch.begin(), scratch.end());
    elem_ptr[e + 1] = static_cast<int>(elem_rows.size());
  }
  std::vector<int> row_elem_ptr(n_ + 1, 0);
  for (int r : elem_rows) ++row_elem_ptr[r + 1];
  for (int r = 0; r < n_; ++r) row_elem_ptr[r + 1] += row_elem_ptr[r];
  std::vector<int> row_elems(elem_rows.size());
  {
    std::vector<int> fill(row_elem_ptr.begin(), row_elem_ptr.end() - 1);
    for (int e = 0; e < ne; ++e) {
      for (int k = elem_ptr[e]; k < elem_ptr[e + 1]; ++k) row_elems[fill[elem_rows[k]]++] = e;
    }
  }
  matrix_.rows = matrix_.cols = n_;
  matrix_.row_ptr.assign(n_ + 1, 0);
  std::vector<int> marker(n_, -1);
  for (int r = 0; r < n_; ++r) {
    const std::size_t start = matrix_.col.size();
    for (int k = row_elem_ptr[r]; k < row_elem_ptr[r + 1]; ++k) {
      const int e = row_elems[k];
      for (int m = elem_ptr[e]; m < elem_ptr[e + 1]; ++m) {
        const int c = elem_rows[m];
        if (marker[c] != r) {
          marker[c] = r;
          matrix_.col.push_back(c);
        }
      }
    }
    std::sort(matrix_.col.begin() + static_cast<std::ptrdiff_t>(start), matrix_.col.end());
    matrix_.row_ptr[r + 1] = static_cast<int>(matrix_.col.size());
  }
  matrix_.val.assign(matrix_.col.size(), 0.0);
  vector_.assign(n_, 0.0);
}

void ConstrainedAssembler::expand(int e) {
  const auto nodes = space_.element_nodes(e);
  const int nb = space_.nodes_per_element();
  const int nt = space_.num_true();
  const std::size_t base = static_cast<std::size_t>(e) * components_ * nb;
  for (int c = 0; c < components_; ++c) {
    for (int l = 0; l < nb; ++l) {
      for (const ConstraintEntry& ce : space_.constraint(nodes[l])) {
        const int dof = c * nt + ce.true_dof;
        terms_.push_back({index_[dof], dof, ce.weight});
      }
      term_ptr_[base + c * nb + l + 1] = static_cast<int>(terms_.size());
    }
  }
}

void ConstrainedAssembler::add(int e, std::span<const double> local_matrix,
                               std::span<const double> local_vector,
                               std::span<const double> lift) {
  const int nloc = components_ * space_.nodes_per_element();
  const std::size_t base = static_cast<std::size_t>(e) * nloc;
  for (int i = 0; i < nloc; ++i) {
    for (int ki = term_ptr_[base + i]; ki < term_ptr_[base + i + 1]; ++ki) {
      const Term& ti = terms_[ki];
      if (ti.row < 0) continue;
      if (!local_vector.empty()) vector_[ti.row] += ti.weight * local_vector[i];
      if (local_matrix.empty()) continue;
      const double* arow = &local_matrix[static_cast<std::size_t>(i) * nloc];
      for (int j = 0; j < nloc; ++j) {
        const double a = arow[j];
        if (a == 0.0) continue;
        for (int kj = term_ptr_[base + j]; kj < term_ptr_[base + j + 1]; ++kj) {
          const Term& tj = terms_[kj];
          const double v = ti.weight * tj.weight * a;
          if (tj.row >= 0) {
            matrix_.val[matrix_.find(ti.row, tj.row)] += v;
          } else if (!lift.empty()) {
            vector_[ti.row] -= v * lift[tj.dof];
          }
        }
      }
    }
  }
}

void ConstrainedAssembler::reset_values() {
  std::fill(matrix_.val.begin(), matrix_.val.end(), 0.0);
  std::fill(vector_.begin(), vector_.end(), 0.0);
}

CsrMatrix ConstrainedAssembler::take_matrix() { return std::move(matrix_); }

}  // namespace stfem
