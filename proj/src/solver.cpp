#include "stfem/solver.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

namespace stfem {

PreconditionerKind parse_preconditioner(const std::string& name) {
  if (name == "identity" || name == "none") return PreconditionerKind::identity;
  if (name == "jacobi") return PreconditionerKind::jacobi;
  if (name == "gs" || name == "gauss-seidel") return PreconditionerKind::gauss_seidel;
  if (name == "sgs" || name == "symmetric-gauss-seidel") {
    return PreconditionerKind::symmetric_gauss_seidel;
  }
  if (name == "lu" || name == "sparse-lu") return PreconditionerKind::sparse_lu;
  if (name == "block-jacobi" || name == "block-jacobi-time") {
    return PreconditionerKind::block_jacobi_time;
  }
  fail(ErrorKind::invalid_argument, "unknown preconditioner '" + name + "'");
}

std::string to_string(PreconditionerKind kind) {
  switch (kind) {
    case PreconditionerKind::identity: return "identity";
    case PreconditionerKind::jacobi: return "jacobi";
    case PreconditionerKind::gauss_seidel: return "gauss-seidel";
    case PreconditionerKind::symmetric_gauss_seidel: return "symmetric-gauss-seidel";
    case PreconditionerKind::block_jacobi_time: return "block-jacobi-time";
    case PreconditionerKind::sparse_lu: return "sparse-lu";
  }
  return "unknown";
}

namespace {

class IdentityPreconditioner final : public Preconditioner {
 public:
  void apply(std::span<const double> r, std::span<double> z) const override {
    std::copy(r.begin(), r.end(), z.begin());
  }
};

class JacobiPreconditioner final : public Preconditioner {
 public:
  explicit JacobiPreconditioner(const CsrMatrix& a) : inv_diag_(a.diagonal()) {
    for (double& d : inv_diag_) {
      require(d != 0.0, ErrorKind::solver, "zero diagonal entry in Jacobi preconditioner");
      d = 1.0 / d;
    }
  }
  void apply(std::span<const double> r, std::span<double> z) const override {
    for (std::size_t i = 0; i < r.size(); ++i) z[i] = inv_diag_[i] * r[i];
  }

 private:
  std::vector<double> inv_diag_;
};

// One forward and, when symmetric, one backward Gauss-Seidel sweep from a zero guess.
// With time-slowest numbering the forward sweep marches in time.
class SgsPreconditioner final : public Preconditioner {
 public:
  SgsPreconditioner(const CsrMatrix& a, bool symmetric)
      : a_(a), symmetric_(symmetric), diag_pos_(a.rows) {
    for (int r = 0; r < a.rows; ++r) {
      diag_pos_[r] = a.find(r, r);
      require(diag_pos_[r] >= 0 && a.val[diag_pos_[r]] != 0.0, ErrorKind::solver,
              "zero diagonal entry in Gauss-Seidel preconditioner");
    }
  }
  void apply(std::span<const double> r, std::span<double> z) const override {
    const int n = a_.rows;
    std::fill(z.begin(), z.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      double s = r[i];
      for (int k = a_.row_ptr[i]; k < diag_pos_[i]; ++k) s -= a_.val[k] * z[a_.col[k]];
      z[i] = s / a_.val[diag_pos_[i]];
    }
    if (!symmetric_) return;
    for (int i = n - 1; i >= 0; --i) {
      double s = r[i];
      for (int k = a_.row_ptr[i]; k < a_.row_ptr[i + 1]; ++k) {
        if (k != diag_pos_[i]) s -= a_.val[k] * z[a_.col[k]];
      }
      z[i] = s / a_.val[diag_pos_[i]];
    }
  }

 private:
  const CsrMatrix& a_;
  bool symmetric_;
  std::vector<int> diag_pos_;
};

class BlockJacobiPreconditioner final : public Preconditioner {
 public:
  BlockJacobiPreconditioner(const CsrMatrix& a, std::span<const int> blocks) {
    require(static_cast<int>(blocks.size()) == a.rows, ErrorKind::invalid_argument,
            "block assignment must cover every row");
    std::map<int, std::vector<int>> members;
    for (int r = 0; r < a.rows; ++r) members[blocks[r]].push_back(r);
    std::vector<int> local(a.rows, -1);
    for (auto& [id, rows] : members) {
      for (int i = 0; i < static_cast<int>(rows.size()); ++i) local[rows[i]] = i;
      std::vector<Eigen::Triplet<double>> trip;
      for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
        const int r = rows[i];
        for (int k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
          if (blocks[a.col[k]] == id) trip.emplace_back(i, local[a.col[k]], a.val[k]);
        }
      }
      const int m = static_cast<int>(rows.size());
      Eigen::SparseMatrix<double> block(m, m);
      block.setFromTriplets(trip.begin(), trip.end());
      block.makeCompressed();
      auto lu = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
      lu->compute(block);
      require(lu->info() == Eigen::Success, ErrorKind::solver, "singular diagonal block");
      blocks_.push_back({rows, std::move(lu)});
    }
  }
  void apply(std::span<const double> r, std::span<double> z) const override {
    for (const Block& b : blocks_) {
      Eigen::VectorXd rhs(static_cast<Eigen::Index>(b.rows.size()));
      for (std::size_t i = 0; i < b.rows.size(); ++i) rhs[static_cast<Eigen::Index>(i)] = r[b.rows[i]];
      const Eigen::VectorXd sol = b.lu->solve(rhs);
      for (std::size_t i = 0; i < b.rows.size(); ++i) z[b.rows[i]] = sol[static_cast<Eigen::Index>(i)];
    }
  }

 private:
  struct Block {
    std::vector<int> rows;
    std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu;
  };
  std::vector<Block> blocks_;
};

// Exact factorization of the whole matrix; FGMRES then converges in one step.
class SparseLuPreconditioner final : public Preconditioner {
 public:
  explicit SparseLuPreconditioner(const CsrMatrix& a) : n_(a.rows) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(a.val.size());
    for (int r = 0; r < a.rows; ++r) {
      for (int k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) trip.emplace_back(r, a.col[k], a.val[k]);
    }
    Eigen::SparseMatrix<double> m(a.rows, a.cols);
    m.setFromTriplets(trip.begin(), trip.end());
    m.makeCompressed();
    lu_.compute(m);
    require(lu_.info() == Eigen::Success, ErrorKind::solver, "sparse LU factorization failed");
  }
  void apply(std::span<const double> r, std::span<double> z) const override {
    const Eigen::Map<const Eigen::VectorXd> rhs(r.data(), n_);
    Eigen::Map<Eigen::VectorXd>(z.data(), n_) = lu_.solve(rhs);
  }

 private:
  int n_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
};

}  // namespace

std::unique_ptr<Preconditioner> make_preconditioner(const CsrMatrix& a, PreconditionerKind kind,
                                                    std::span<const int> blocks) {
  switch (kind) {
    case PreconditionerKind::identity: return std::make_unique<IdentityPreconditioner>();
    case PreconditionerKind::jacobi: return std::make_unique<JacobiPreconditioner>(a);
    case PreconditionerKind::gauss_seidel: return std::make_unique<SgsPreconditioner>(a, false);
    case PreconditionerKind::symmetric_gauss_seidel:
      return std::make_unique<SgsPreconditioner>(a, true);
    case PreconditionerKind::block_jacobi_time:
      return std::make_unique<BlockJacobiPreconditioner>(a, blocks);
    case PreconditionerKind::sparse_lu: return std::make_unique<SparseLuPreconditioner>(a);
  }
  fail(ErrorKind::invalid_argument, "unknown preconditioner kind");
}

std::vector<int> time_layer_blocks(const FeSpace& space, const LinearSystem& system) {
  const int ta = space.dim() - 1;
  std::map<double, int> layer;
  std::vector<int> blocks(system.size());
  for (int k = 0; k < system.size(); ++k) {
    const double t = space.node_position(space.node_of_true(system.free_to_true[k]))[ta];
    auto [it, inserted] = layer.try_emplace(t, static_cast<int>(layer.size()));
    blocks[k] = it->second;
  }
  return blocks;
}

FgmresResult fgmres(const CsrMatrix& a, std::span<const double> b, std::span<const double> x0,
                    const Preconditioner& m, const FgmresOptions& options) {
  require(a.rows == a.cols && static_cast<int>(b.size()) == a.rows, ErrorKind::invalid_argument,
          "fgmres: dimension mismatch");
  require(options.restart >= 1, ErrorKind::invalid_argument, "fgmres: restart must be >= 1");
  const auto start = std::chrono::steady_clock::now();
  const int n = a.rows;
  const int k = options.restart;
  FgmresResult out;
  out.x.assign(n, 0.0);
  if (!x0.empty()) {
    require(static_cast<int>(x0.size()) == n, ErrorKind::invalid_argument,
            "fgmres: initial guess has the wrong size");
    std::copy(x0.begin(), x0.end(), out.x.begin());
  }
  std::vector<double>& x = out.x;
  SolveStats& st = out.stats;

  std::vector<double> r(n);
  auto residual = [&]() {
    a.multiply(x, r);
    for (int i = 0; i < n; ++i) r[i] = b[i] - r[i];
    return norm2(r);
  };
  double beta = residual();
  st.initial_residual = beta;
  const double target = options.rtol * beta;
  if (beta == 0.0 || n == 0) {
    st.final_residual = beta;
    st.converged = true;
    return out;
  }

  std::vector<std::vector<double>> v(k + 1, std::vector<double>(n));
  std::vector<std::vector<double>> z(k, std::vector<double>(n));
  std::vector<double> h(static_cast<std::size_t>(k + 1) * k);
  std::vector<double> cs(k), sn(k), g(k + 1), y(k);
  auto H = [&](int i, int j) -> double& { return h[static_cast<std::size_t>(i) * k + j]; };

  double previous_cycle = beta;
  while (st.iterations < options.max_iterations) {
    for (int i = 0; i < n; ++i) v[0][i] = r[i] / beta;
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = beta;
    int used = 0;
    bool stop = false;
    for (int j = 0; j < k; ++j) {
      m.apply(v[j], z[j]);
      std::vector<double>& w = v[j + 1];
      a.multiply(z[j], w);
      const double before = norm2(w);
      for (int i = 0; i <= j; ++i) {
        H(i, j) = dot(w, v[i]);
        axpy(-H(i, j), v[i], w);
      }
      double after = norm2(w);
      if (after < 0.7 * before) {
        for (int i = 0; i <= j; ++i) {
          const double c = dot(w, v[i]);
          H(i, j) += c;
          axpy(-c, v[i], w);
        }
        after = norm2(w);
      }
      H(j + 1, j) = after;
      for (int i = 0; i < j; ++i) {
        const double t = cs[i] * H(i, j) + sn[i] * H(i + 1, j);
        H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
        H(i, j) = t;
      }
      const double denom = std::hypot(H(j, j), H(j + 1, j));
      cs[j] = denom == 0.0 ? 1.0 : H(j, j) / denom;
      sn[j] = denom == 0.0 ? 0.0 : H(j + 1, j) / denom;
      H(j, j) = denom;
      H(j + 1, j) = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];
      ++st.iterations;
      used = j + 1;
      const double est = std::abs(g[j + 1]);
      st.history.push_back(est);
      if (after == 0.0 || est <= target || st.iterations >= options.max_iterations) {
        stop = true;
        break;
      }
      for (int i = 0; i < n; ++i) w[i] /= after;
    }
    for (int i = used - 1; i >= 0; --i) {
      double s = g[i];
      for (int l = i + 1; l < used; ++l) s -= H(i, l) * y[l];
      y[i] = H(i, i) == 0.0 ? 0.0 : s / H(i, i);
    }
    for (int i = 0; i < used; ++i) axpy(y[i], z[i], x);
    beta = residual();
    if (beta <= target) {
      st.converged = true;
      break;
    }
    if (stop && st.iterations >= options.max_iterations) break;
    if (beta >= previous_cycle * (1.0 - 1e-12)) {
      st.stagnated = true;
      break;
    }
    previous_cycle = beta;
  }
  st.final_residual = beta;
  st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::vector<double> solve_system(const FeSpace& space, const LinearSystem& system,
                                 const SolverConfig& config, std::span<const double> x0,
                                 SolveStats* stats) {
  std::vector<int> blocks;
  if (config.preconditioner == PreconditionerKind::block_jacobi_time) {
    blocks = time_layer_blocks(space, system);
  }
  const auto m = make_preconditioner(system.matrix, config.preconditioner, blocks);
  FgmresResult res = fgmres(system.matrix, system.rhs, x0, *m, config.fgmres);
  if (stats) *stats = res.stats;
  return system.to_true(space, res.x);
}

NestedResult nested_solve(std::span<const NestedLevel> levels, double rtol_coarse,
                          double rtol_inner, const SolverConfig& config) {
  require(!levels.empty(), ErrorKind::invalid_argument, "nested_solve needs at least one level");
  NestedResult out;
  std::vector<double> u;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const FeSpace& space = *levels[l].space;
    const LinearSystem& sys = *levels[l].system;
    SolverConfig cfg = config;
    std::vector<double> x0;
    if (l == 0) {
      cfg.fgmres.rtol = rtol_coarse;
    } else {
      cfg.fgmres.rtol = rtol_inner;
      const std::vector<double> warm = prolongate(*levels[l - 1].space, u, space);
      x0 = sys.restrict_to_free(warm);
    }
    SolveStats st;
    u = solve_system(space, sys, cfg, x0, &st);
    require(st.converged, ErrorKind::solver,
            "FGMRES did not converge on nested level " + std::to_string(l));
    out.stats.push_back(st);
  }
  out.solution = std::move(u);
  return out;
}

}  // namespace stfem
