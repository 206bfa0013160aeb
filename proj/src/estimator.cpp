#include "stfem/estimator.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "stfem/sparse.hpp"

namespace stfem {

void MajorantParams::validate() const {
  require(delta > 0.0 && delta <= 2.0, ErrorKind::parameter, "delta must lie in (0, 2]");
  require(mu > 0.0 && mu < 1.0, ErrorKind::parameter, "mu must lie in (0, 1)");
  require(beta > mu, ErrorKind::parameter, "beta must exceed mu");
  require(gamma > 1.0, ErrorKind::parameter, "gamma must exceed 1");
  require(c_f > 0.0, ErrorKind::parameter, "the Friedrichs constant must be positive");
}

MajorantParams MajorantParams::make(double delta, double beta, double mu, double gamma,
                                    double c_f) {
  MajorantParams p{delta, beta, mu, gamma, c_f};
  p.validate();
  return p;
}

MajorantParams MajorantParams::defaults_for(const ProblemSpec& problem) {
  MajorantParams p;
  p.c_f = problem.friedrichs_constant();
  p.validate();
  return p;
}

std::vector<double> IndicatorField::marking_values() const {
  std::vector<double> m(eta2.size());
  for (std::size_t i = 0; i < eta2.size(); ++i) m[i] = std::max(eta2[i], 0.0);
  return m;
}

std::vector<double> nodal_average(const FeSpace& space, const ElementNodeFunction& field) {
  std::vector<double> sum(space.num_true(), 0.0);
  std::vector<double> weight(space.num_true(), 0.0);
  for (int e = 0; e < space.num_elements(); ++e) {
    const Brick b = space.mesh().brick(space.brick_id(e));
    const double vol = b.volume();
    const auto nodes = space.element_nodes(e);
    for (int l = 0; l < space.nodes_per_element(); ++l) {
      const int t = space.true_index(nodes[l]);
      if (t < 0) continue;
      sum[t] += vol * field(e, b, l);
      weight[t] += vol;
    }
  }
  for (int t = 0; t < space.num_true(); ++t) {
    if (weight[t] > 0.0) sum[t] /= weight[t];
  }
  return sum;
}

namespace {

// Reference coordinates of the local nodes, axis 0 fastest.
std::vector<Point> local_node_points(const ShapeSet& shapes, int dim) {
  const int n1 = shapes.size();
  int nb = 1;
  for (int a = 0; a < dim; ++a) nb *= n1;
  std::vector<Point> pts(nb);
  for (int l = 0; l < nb; ++l) {
    int r = l;
    for (int a = 0; a < dim; ++a) {
      pts[l][a] = shapes.nodes()[r % n1];
      r /= n1;
    }
  }
  return pts;
}

}  // namespace

std::vector<double> recover_derivative(const FeSpace& space, const ProblemSpec& problem,
                                       std::span<const double> u, int axis, bool scale_by_nu,
                                       const FeSpace* target) {
  require(axis >= 0 && axis < space.dim(), ErrorKind::invalid_argument, "axis out of range");
  if (target == nullptr) target = &space;
  require(target->num_elements() == space.num_elements() &&
              target->degree() == space.degree() && &target->mesh() == &space.mesh(),
          ErrorKind::invalid_argument, "target space must share the mesh and degree");
  const std::vector<double> full = space.expand(u);
  const std::vector<Point> pts = local_node_points(space.shapes(), space.dim());
  const Tabulation tab = tabulate(space.shapes(), space.dim(), pts);
  const int nb = space.nodes_per_element();
  std::vector<double> local(nb);
  int cached = -1;
  return nodal_average(*target, [&](int e, const Brick& b, int l) {
    if (cached != e) {
      space.gather(e, full, local);
      cached = e;
    }
    double d = 0.0;
    for (int i = 0; i < nb; ++i) d += local[i] * tab.dv(axis, l, i);
    d /= b.sizes[axis];
    if (scale_by_nu) d *= problem.nu(map_to_brick(b, pts[l]));
    return d;
  });
}

std::shared_ptr<const FeSpace> make_flux_space(const FeSpace& space) {
  return std::make_shared<FeSpace>(space.mesh_ptr(), space.degree(), true);
}

FluxField recover_flux(const FeSpace& space, const ProblemSpec& problem,
                       std::span<const double> u, std::shared_ptr<const FeSpace> flux_space) {
  FluxField y;
  y.space = flux_space ? std::move(flux_space) : make_flux_space(space);
  y.components = space.dim() - 1;
  y.coeffs.reserve(static_cast<std::size_t>(y.components) * y.space->num_true());
  for (int a = 0; a < y.components; ++a) {
    const std::vector<double> c = recover_derivative(space, problem, u, a, true, y.space.get());
    y.coeffs.insert(y.coeffs.end(), c.begin(), c.end());
  }
  return y;
}

double optimal_beta(double d, double r, double mu, double current) {
  require(d >= 0.0 && r >= 0.0, ErrorKind::invalid_argument, "norms must be non-negative");
  if (d == 0.0 && r == 0.0) return current;
  const double floor = std::nextafter(mu, std::numeric_limits<double>::infinity());
  if (d == 0.0) return std::max(current, floor);
  return std::max(r / d, floor);
}

namespace {

// Quantities at one quadrature point.
struct Sample {
  double w = 0.0;
  Point x{};
  double nu = 1.0;
  double f = 0.0;
  Point gu{};     // grad of u_h, time last
  Point y{};      // flux components
  double divy = 0.0;
  double th = 0.0;
  Point gth{};    // grad of theta, time last
};

// Evaluates u_h, y and an optional scalar field on the quadrature points of elements.
class Sampler {
 public:
  Sampler(const FeSpace& space, const ProblemSpec& problem, std::span<const double> u,
          const FluxField* y, std::span<const double> theta)
      : space_(space), problem_(problem), nb_(space.nodes_per_element()) {
    u_ = space.expand(u);
    if (y != nullptr) {
      flux_space_ = y->space.get();
      for (int a = 0; a < y->components; ++a) y_.push_back(flux_space_->expand(y->component(a)));
    }
    if (!theta.empty()) th_ = space.expand(theta);
    lu_.resize(nb_);
    ly_.assign(y_.size(), std::vector<double>(nb_));
    lt_.resize(nb_);
  }

  void sample(int e, const Brick& b, const QuadPoints& qp, bool with_source,
              std::vector<Sample>& out) {
    const Tabulation& tab = qp.tab;
    const int D = b.dim;
    const int ta = D - 1;
    space_.gather(e, u_, lu_);
    for (std::size_t a = 0; a < y_.size(); ++a) flux_space_->gather(e, y_[a], ly_[a]);
    if (!th_.empty()) space_.gather(e, th_, lt_);
    const double measure = qp.top_face ? b.volume() / b.sizes[ta] : b.volume();
    out.resize(qp.rule.size());
    for (int k = 0; k < qp.rule.size(); ++k) {
      Sample s;
      s.w = qp.rule.weights[k] * measure;
      s.x = map_to_brick(b, qp.rule.points[k]);
      s.nu = problem_.nu(s.x);
      if (with_source) s.f = problem_.f(s.x);
      for (int i = 0; i < nb_; ++i) {
        const double v = tab.v(k, i);
        for (int a = 0; a < D; ++a) {
          const double da = tab.dv(a, k, i) / b.sizes[a];
          s.gu[a] += lu_[i] * da;
          if (!th_.empty()) s.gth[a] += lt_[i] * da;
        }
        for (std::size_t a = 0; a < y_.size(); ++a) {
          s.y[a] += ly_[a][i] * v;
          s.divy += ly_[a][i] * tab.dv(static_cast<int>(a), k, i) / b.sizes[a];
        }
        if (!th_.empty()) s.th += lt_[i] * v;
      }
      out[k] = s;
    }
  }

 private:
  const FeSpace& space_;
  const FeSpace* flux_space_ = nullptr;
  const ProblemSpec& problem_;
  int nb_;
  std::vector<double> u_;
  std::vector<std::vector<double>> y_;
  std::vector<double> th_;
  std::vector<double> lu_;
  std::vector<std::vector<double>> ly_;
  std::vector<double> lt_;
};

// Per-element ingredients of both majorants.
struct ElementTerms {
  std::vector<double> flux;      // int |y - nu grad u_h + nu grad theta|^2 / nu
  std::vector<double> residual;  // c^2 int (f - dt u_h - dt theta + div y)^2
  std::vector<double> terminal;  // int_{top face} theta^2
  std::vector<double> cross;     // 2 int nu grad u_h . grad theta + (dt u_h - f) theta
};

ElementTerms element_terms(const FeSpace& space, const ProblemSpec& problem,
                           std::span<const double> u, const FluxField& y,
                           std::span<const double> theta, double c_f,
                           const QuadraturePolicy& policy) {
  const int ne = space.num_elements();
  const int D = space.dim();
  const int ta = D - 1;
  ElementTerms t;
  t.flux.assign(ne, 0.0);
  t.residual.assign(ne, 0.0);
  t.terminal.assign(ne, 0.0);
  t.cross.assign(ne, 0.0);
  const bool with_theta = !theta.empty();
  Sampler sampler(space, problem, u, &y, theta);
  QuadratureTable table(space.shapes(), D);
  const Lattice top = space.mesh().root_cells()[ta] * kRootSpan;
  std::vector<Sample> pts;
  for (int e = 0; e < ne; ++e) {
    const int id = space.brick_id(e);
    const Brick b = space.mesh().brick(id);
    const int q = policy.points(problem, b, space.degree());
    const int pieces = policy.pieces(problem, b);
    sampler.sample(e, b, table.volume(q, pieces), true, pts);
    double fl = 0.0, res = 0.0, cr = 0.0;
    for (const Sample& s : pts) {
      double w2 = 0.0;
      for (int a = 0; a < ta; ++a) {
        const double w = s.y[a] - s.nu * s.gu[a] + s.nu * s.gth[a];
        w2 += w * w;
      }
      fl += s.w * w2 / s.nu;
      const double r = s.f - s.gu[ta] - s.gth[ta] + s.divy;
      res += s.w * r * r;
      if (with_theta) {
        double g = 0.0;
        for (int a = 0; a < ta; ++a) g += s.gu[a] * s.gth[a];
        cr += s.w * (s.nu * g + (s.gu[ta] - s.f) * s.th);
      }
    }
    t.flux[e] = fl;
    t.residual[e] = c_f * c_f * res;
    t.cross[e] = 2.0 * cr;
    if (with_theta && space.mesh().box(id).hi[ta] == top) {
      sampler.sample(e, b, table.top_face(q, pieces), false, pts);
      double tt = 0.0;
      for (const Sample& s : pts) tt += s.w * s.th * s.th;
      t.terminal[e] = tt;
    }
  }
  return t;
}

IndicatorField combine_terms(const ElementTerms& t, const MajorantParams& prm, bool second) {
  IndicatorField ind;
  const std::size_t ne = t.flux.size();
  ind.eta2.resize(ne);
  const double a = (1.0 + prm.beta) / prm.delta;
  const double b = (1.0 + prm.beta) / (prm.beta * prm.delta);
  for (std::size_t e = 0; e < ne; ++e) {
    double v = a * t.flux[e] + b * t.residual[e];
    if (second) v += prm.gamma * t.terminal[e] + t.cross[e];
    ind.eta2[e] = v;
    ind.total += v;
  }
  return ind;
}

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

IndicatorField majorant1(const FeSpace& space, const ProblemSpec& problem,
                         std::span<const double> u, const FluxField& y,
                         const MajorantParams& params, const QuadraturePolicy& policy) {
  params.validate();
  const ElementTerms t = element_terms(space, problem, u, y, {}, params.c_f, policy);
  return combine_terms(t, params, false);
}

IndicatorField majorant2(const FeSpace& space, const ProblemSpec& problem,
                         std::span<const double> u, const FluxField& y,
                         std::span<const double> theta, const MajorantParams& params,
                         const QuadraturePolicy& policy) {
  params.validate();
  require(theta.empty() || static_cast<int>(theta.size()) == space.num_true(),
          ErrorKind::invalid_argument, "theta has the wrong size");
  const ElementTerms t = element_terms(space, problem, u, y, theta, params.c_f, policy);
  return combine_terms(t, params, true);
}

namespace {

void scatter(const FeSpace& space, int components, const std::vector<int>& index, int e,
             std::span<const double> local, std::vector<double>& out) {
  const auto nodes = space.element_nodes(e);
  const int nb = space.nodes_per_element();
  const int nt = space.num_true();
  for (int c = 0; c < components; ++c) {
    for (int l = 0; l < nb; ++l) {
      const double v = local[c * nb + l];
      if (v == 0.0) continue;
      for (const ConstraintEntry& ce : space.constraint(nodes[l])) {
        const int r = index[c * nt + ce.true_dof];
        if (r >= 0) out[r] += ce.weight * v;
      }
    }
  }
}

CsrMatrix linear_combination(std::span<const std::pair<double, const CsrMatrix*>> terms) {
  CsrMatrix out = *terms[0].second;
  for (double& v : out.val) v *= terms[0].first;
  for (std::size_t k = 1; k < terms.size(); ++k) {
    const CsrMatrix& m = *terms[k].second;
    for (std::size_t i = 0; i < out.val.size(); ++i) out.val[i] += terms[k].first * m.val[i];
  }
  return out;
}

// A few CG steps from the current x, optionally preconditioned by the diagonal.
void cg_steps(const CsrMatrix& a, std::span<const double> b, std::vector<double>& x, int steps,
              bool jacobi) {
  const std::size_t n = x.size();
  std::vector<double> r(n), z(n), p(n), ap(n);
  std::vector<double> inv_diag;
  if (jacobi) {
    inv_diag = a.diagonal();
    for (double& d : inv_diag) d = d > 0.0 ? 1.0 / d : 1.0;
  }
  auto precondition = [&] {
    if (!jacobi) {
      z = r;
      return;
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  };
  a.multiply(x, ap);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
  precondition();
  p = z;
  double rz = dot(r, z);
  for (int it = 0; it < steps && rz > 0.0; ++it) {
    a.multiply(p, ap);
    const double pap = dot(p, ap);
    if (!(pap > 0.0)) break;
    const double alpha = rz / pap;
    axpy(alpha, p, x);
    axpy(-alpha, ap, r);
    precondition();
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    rz = rz_new;
  }
}

// Sparse Cholesky of one instance of a majorant quadratic. The matrices of later sweeps
// differ only in the weights of a few fixed parts, so the factor stays a good
// preconditioner and CG converges in a handful of steps.
class CholeskyPreconditioner {
 public:
  // The symbolic analysis is kept; every call refactors numerically (beta changes the values).
  bool factorize(const CsrMatrix& a) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(a.val.size());
    for (int r = 0; r < a.rows; ++r) {
      for (int k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
        if (a.col[k] <= r) trip.emplace_back(r, a.col[k], a.val[k]);
      }
    }
    Eigen::SparseMatrix<double> m(a.rows, a.cols);
    m.setFromTriplets(trip.begin(), trip.end());
    if (!analyzed_) {
      ldlt_.analyzePattern(m);
      analyzed_ = true;
    }
    ldlt_.factorize(m);
    return ldlt_.info() == Eigen::Success;
  }
  void apply(std::span<const double> r, std::span<double> z) const {
    const Eigen::Map<const Eigen::VectorXd> rhs(r.data(), static_cast<Eigen::Index>(r.size()));
    Eigen::Map<Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size())) = ldlt_.solve(rhs);
  }

 private:
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> ldlt_;
  bool analyzed_ = false;
};

// Factor the sweep matrix, then CG preconditioned by the factor to a relative residual
// of 1e-10 (one or two steps unless the factorization is inaccurate).
void direct_sweep(const CsrMatrix& a, std::span<const double> b, std::vector<double>& x,
                  CholeskyPreconditioner& chol) {
  if (!chol.factorize(a)) return;
  const std::size_t n = x.size();
  std::vector<double> r(n), z(n), p(n), ap(n);
  a.multiply(x, ap);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
  const double stop = 1e-10 * norm2(b);
  chol.apply(r, z);
  p = z;
  double rz = dot(r, z);
  for (int it = 0; it < 50 && norm2(r) > stop && rz > 0.0; ++it) {
    a.multiply(p, ap);
    const double pap = dot(p, ap);
    if (!(pap > 0.0)) break;
    const double alpha = rz / pap;
    axpy(alpha, p, x);
    axpy(-alpha, ap, r);
    chol.apply(r, z);
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    rz = rz_new;
  }
}

// Quadratic forms of the majorants in the flux and theta DOFs, assembled once per mesh.
class MajorantQuadratics {
 public:
  MajorantQuadratics(const FeSpace& space, const FeSpace& flux_space,
                     const ProblemSpec& problem, const QuadraturePolicy& policy, bool with_theta)
      : space_(space),
        flux_space_(flux_space),
        problem_(problem),
        policy_(policy),
        table_(space.shapes(), space.dim()) {
    const int D = space.dim();
    const int dx = D - 1;
    const int nt = space.num_true();
    const int nf = flux_space.num_true();
    flux_index_.resize(static_cast<std::size_t>(dx) * nf);
    for (int i = 0; i < dx * nf; ++i) flux_index_[i] = i;
    build_flux();
    if (with_theta) {
      const std::vector<char> lateral = space.boundary_mask(kLateral);
      theta_index_.assign(nt, -1);
      int n = 0;
      for (int i = 0; i < nt; ++i) {
        if (!lateral[i]) theta_index_[i] = n++;
      }
      theta_free_ = n;
      build_theta();
    }
  }

  int flux_size() const { return static_cast<int>(flux_index_.size()); }
  int theta_size() const { return theta_free_; }
  const std::vector<int>& theta_index() const { return theta_index_; }

  CsrMatrix flux_matrix(const MajorantParams& p) const {
    const double a = (1.0 + p.beta) / p.delta;
    const double b = (1.0 + p.beta) * p.c_f * p.c_f / (p.beta * p.delta);
    const std::pair<double, const CsrMatrix*> t[] = {{a, &mass_}, {b, &divdiv_}};
    return linear_combination(t);
  }

  CsrMatrix theta_matrix(const MajorantParams& p) const {
    const double a = (1.0 + p.beta) / p.delta;
    const double b = (1.0 + p.beta) * p.c_f * p.c_f / (p.beta * p.delta);
    const std::pair<double, const CsrMatrix*> t[] = {
        {a, &stiff_}, {b, &time_}, {p.gamma, &face_}};
    return linear_combination(t);
  }

  // Right-hand side of the flux problem for fixed theta.
  std::vector<double> flux_rhs(std::span<const double> u, std::span<const double> theta,
                               const MajorantParams& p) {
    const int D = space_.dim();
    const int dx = D - 1;
    const int nb = space_.nodes_per_element();
    const double ca = (1.0 + p.beta) / p.delta;
    const double cb = (1.0 + p.beta) * p.c_f * p.c_f / (p.beta * p.delta);
    std::vector<double> rhs(flux_size(), 0.0);
    Sampler sampler(space_, problem_, u, nullptr, theta);
    std::vector<Sample> pts;
    std::vector<double> local(static_cast<std::size_t>(dx) * nb);
    for (int e = 0; e < space_.num_elements(); ++e) {
      const Brick b = space_.mesh().brick(space_.brick_id(e));
      const QuadPoints& qp = rule(b);
      sampler.sample(e, b, qp, true, pts);
      std::fill(local.begin(), local.end(), 0.0);
      for (int k = 0; k < qp.rule.size(); ++k) {
        const Sample& s = pts[k];
        const double r0 = s.f - s.gu[dx] - s.gth[dx];
        for (int a = 0; a < dx; ++a) {
          const double g = s.gu[a] - s.gth[a];  // (nu grad u_h - nu grad theta) / nu
          for (int i = 0; i < nb; ++i) {
            local[a * nb + i] += s.w * (ca * g * qp.tab.v(k, i) -
                                        cb * r0 * qp.tab.dv(a, k, i) / b.sizes[a]);
          }
        }
      }
      scatter(flux_space_, dx, flux_index_, e, local, rhs);
    }
    return rhs;
  }

  // Right-hand side of the theta problem for fixed flux.
  std::vector<double> theta_rhs(std::span<const double> u, const FluxField& y,
                                const MajorantParams& p) {
    const int D = space_.dim();
    const int ta = D - 1;
    const int nb = space_.nodes_per_element();
    const double ca = (1.0 + p.beta) / p.delta;
    const double cb = (1.0 + p.beta) * p.c_f * p.c_f / (p.beta * p.delta);
    std::vector<double> rhs(theta_free_, 0.0);
    Sampler sampler(space_, problem_, u, &y, {});
    std::vector<Sample> pts;
    std::vector<double> local(nb);
    for (int e = 0; e < space_.num_elements(); ++e) {
      const Brick b = space_.mesh().brick(space_.brick_id(e));
      const QuadPoints& qp = rule(b);
      sampler.sample(e, b, qp, true, pts);
      std::fill(local.begin(), local.end(), 0.0);
      for (int k = 0; k < qp.rule.size(); ++k) {
        const Sample& s = pts[k];
        const double rho = s.f - s.gu[ta] + s.divy;
        for (int i = 0; i < nb; ++i) {
          double v = 0.0;
          for (int a = 0; a < ta; ++a) {
            const double di = qp.tab.dv(a, k, i) / b.sizes[a];
            const double w0 = s.y[a] - s.nu * s.gu[a];
            v -= ca * w0 * di + s.nu * s.gu[a] * di;
          }
          const double dti = qp.tab.dv(ta, k, i) / b.sizes[ta];
          v += cb * rho * dti - (s.gu[ta] - s.f) * qp.tab.v(k, i);
          local[i] += s.w * v;
        }
      }
      scatter(space_, 1, theta_index_, e, local, rhs);
    }
    return rhs;
  }

 private:
  const QuadPoints& rule(const Brick& b) {
    return table_.volume(policy_.points(problem_, b, space_.degree()),
                         policy_.pieces(problem_, b));
  }

  using CacheKey = std::array<double, kMaxDim + 2>;

  CacheKey key(const Brick& b) const {
    CacheKey k{};
    for (int a = 0; a < b.dim; ++a) k[a] = b.sizes[a];
    k[kMaxDim] = policy_.points(problem_, b, space_.degree());
    k[kMaxDim + 1] = policy_.pieces(problem_, b);
    return k;
  }

  void build_flux() {
    const int D = space_.dim();
    const int dx = D - 1;
    const int nb = space_.nodes_per_element();
    const int nl = dx * nb;
    ConstrainedAssembler asmb(flux_space_, dx, flux_index_, flux_size());
    std::map<CacheKey, std::pair<std::vector<double>, std::vector<double>>> cache;
    const bool constant = problem_.nu.is_constant();
    std::vector<std::pair<std::vector<double>, std::vector<double>>> per_element;
    if (!constant) per_element.resize(space_.num_elements());
    auto local_matrices = [&](const Brick& b) {
      const QuadPoints& qp = rule(b);
      std::vector<double> m(static_cast<std::size_t>(nl) * nl, 0.0);
      std::vector<double> g(static_cast<std::size_t>(nl) * nl, 0.0);
      const double vol = b.volume();
      for (int k = 0; k < qp.rule.size(); ++k) {
        const double w = qp.rule.weights[k] * vol;
        const double inv_nu = 1.0 / problem_.nu(map_to_brick(b, qp.rule.points[k]));
        for (int i = 0; i < nb; ++i) {
          const double vi = qp.tab.v(k, i);
          for (int j = 0; j < nb; ++j) {
            const double mij = w * inv_nu * vi * qp.tab.v(k, j);
            for (int a = 0; a < dx; ++a) {
              m[static_cast<std::size_t>(a * nb + i) * nl + a * nb + j] += mij;
            }
          }
        }
        for (int a = 0; a < dx; ++a) {
          for (int i = 0; i < nb; ++i) {
            const double di = w * qp.tab.dv(a, k, i) / b.sizes[a];
            for (int c = 0; c < dx; ++c) {
              double* row = &g[static_cast<std::size_t>(a * nb + i) * nl + c * nb];
              for (int j = 0; j < nb; ++j) row[j] += di * qp.tab.dv(c, k, j) / b.sizes[c];
            }
          }
        }
      }
      return std::make_pair(std::move(m), std::move(g));
    };
    auto get = [&](int e, const Brick& b) -> const std::pair<std::vector<double>,
                                                             std::vector<double>>& {
      if (!constant) {
        per_element[e] = local_matrices(b);
        return per_element[e];
      }
      const CacheKey k = key(b);
      auto it = cache.find(k);
      if (it == cache.end()) it = cache.emplace(k, local_matrices(b)).first;
      return it->second;
    };
    for (int e = 0; e < space_.num_elements(); ++e) {
      const Brick b = space_.mesh().brick(space_.brick_id(e));
      asmb.add(e, get(e, b).first, {});
    }
    mass_ = asmb.matrix();
    asmb.reset_values();
    for (int e = 0; e < space_.num_elements(); ++e) {
      const Brick b = space_.mesh().brick(space_.brick_id(e));
      asmb.add(e, constant ? get(e, b).second : per_element[e].second, {});
    }
    divdiv_ = asmb.take_matrix();
  }

  void build_theta() {
    const int D = space_.dim();
    const int ta = D - 1;
    const int nb = space_.nodes_per_element();
    const Lattice top = space_.mesh().root_cells()[ta] * kRootSpan;
    ConstrainedAssembler asmb(space_, 1, theta_index_, theta_free_);
    struct Local {
      std::vector<double> k, t, f;
    };
    std::map<std::pair<CacheKey, bool>, Local> cache;
    auto local_matrices = [&](const Brick& b, bool on_top) {
      Local l{std::vector<double>(nb * nb, 0.0), std::vector<double>(nb * nb, 0.0),
              std::vector<double>(nb * nb, 0.0)};
      const QuadPoints& qp = rule(b);
      const double vol = b.volume();
      for (int k = 0; k < qp.rule.size(); ++k) {
        const double w = qp.rule.weights[k] * vol;
        const double nu = problem_.nu(map_to_brick(b, qp.rule.points[k]));
        for (int i = 0; i < nb; ++i) {
          for (int j = 0; j < nb; ++j) {
            double g = 0.0;
            for (int a = 0; a < ta; ++a) {
              g += qp.tab.dv(a, k, i) * qp.tab.dv(a, k, j) / (b.sizes[a] * b.sizes[a]);
            }
            l.k[i * nb + j] += w * nu * g;
            l.t[i * nb + j] +=
                w * qp.tab.dv(ta, k, i) * qp.tab.dv(ta, k, j) / (b.sizes[ta] * b.sizes[ta]);
          }
        }
      }
      if (on_top) {
        const QuadPoints& fq = table_.top_face(policy_.points(problem_, b, space_.degree()),
                                               policy_.pieces(problem_, b));
        const double area = vol / b.sizes[ta];
        for (int k = 0; k < fq.rule.size(); ++k) {
          const double w = fq.rule.weights[k] * area;
          for (int i = 0; i < nb; ++i) {
            for (int j = 0; j < nb; ++j) l.f[i * nb + j] += w * fq.tab.v(k, i) * fq.tab.v(k, j);
          }
        }
      }
      return l;
    };
    const bool constant = problem_.nu.is_constant();
    std::vector<Local> per_element;
    if (!constant) per_element.resize(space_.num_elements());
    auto get = [&](int e) -> const Local& {
      const int id = space_.brick_id(e);
      const Brick b = space_.mesh().brick(id);
      const bool on_top = space_.mesh().box(id).hi[ta] == top;
      if (!constant) {
        if (per_element[e].k.empty()) per_element[e] = local_matrices(b, on_top);
        return per_element[e];
      }
      const auto k = std::make_pair(key(b), on_top);
      auto it = cache.find(k);
      if (it == cache.end()) it = cache.emplace(k, local_matrices(b, on_top)).first;
      return it->second;
    };
    for (int e = 0; e < space_.num_elements(); ++e) asmb.add(e, get(e).k, {});
    stiff_ = asmb.matrix();
    asmb.reset_values();
    for (int e = 0; e < space_.num_elements(); ++e) asmb.add(e, get(e).t, {});
    time_ = asmb.matrix();
    asmb.reset_values();
    for (int e = 0; e < space_.num_elements(); ++e) asmb.add(e, get(e).f, {});
    face_ = asmb.take_matrix();
  }

  const FeSpace& space_;
  const FeSpace& flux_space_;
  const ProblemSpec& problem_;
  QuadraturePolicy policy_;
  QuadratureTable table_;
  std::vector<int> flux_index_;
  std::vector<int> theta_index_;
  int theta_free_ = 0;
  CsrMatrix mass_, divdiv_;
  CsrMatrix stiff_, time_, face_;
};

struct Evaluation {
  ElementTerms terms;
  double total = 0.0;
};

Evaluation evaluate(const FeSpace& space, const ProblemSpec& problem, std::span<const double> u,
                    const FluxField& y, std::span<const double> theta,
                    const MajorantParams& prm, bool second, const QuadraturePolicy& policy) {
  Evaluation ev;
  ev.terms = element_terms(space, problem, u, y, theta, prm.c_f, policy);
  ev.total = combine_terms(ev.terms, prm, second).total;
  return ev;
}

MajorantResult minimize(const FeSpace& space, const ProblemSpec& problem,
                        std::span<const double> u, const MajorantParams& params,
                        const MinimizeOptions& options, const QuadraturePolicy& policy,
                        bool second) {
  params.validate();
  require(options.outer >= 0 && options.cg_steps >= 0, ErrorKind::invalid_argument,
          "minimization step counts must be non-negative");
  MajorantResult res;
  res.params = params;
  res.y = recover_flux(space, problem, u);
  if (second) res.theta.assign(space.num_true(), 0.0);
  MajorantParams& prm = res.params;

  Evaluation ev = evaluate(space, problem, u, res.y, res.theta, prm, second, policy);
  res.history.push_back(ev.total);
  const bool iterate = options.outer > 0;
  std::unique_ptr<MajorantQuadratics> quad;
  if (iterate && (options.cg_steps > 0 || options.direct)) {
    quad = std::make_unique<MajorantQuadratics>(space, *res.y.space, problem, policy, second);
  }
  CholeskyPreconditioner flux_chol;
  CholeskyPreconditioner theta_chol;
  auto sweep = [&](const CsrMatrix& a, std::span<const double> b, std::vector<double>& x,
                   CholeskyPreconditioner& chol) {
    if (options.direct) {
      direct_sweep(a, b, x, chol);
    } else {
      cg_steps(a, b, x, options.cg_steps, options.jacobi);
    }
  };
  auto accept = [&](Evaluation&& trial) {
    res.history.push_back(std::min(trial.total, ev.total));
    if (trial.total <= ev.total) {
      ev = std::move(trial);
      return true;
    }
    return false;
  };
  for (int outer = 0; outer < options.outer; ++outer) {
    const double before = ev.total;
    // beta: closed form for the current (y, theta).
    const double d = std::sqrt(sum(ev.terms.flux));
    const double r = std::sqrt(sum(ev.terms.residual));
    const double old_beta = prm.beta;
    prm.beta = optimal_beta(d, r, prm.mu, prm.beta);
    {
      Evaluation trial = evaluate(space, problem, u, res.y, res.theta, prm, second, policy);
      if (!accept(std::move(trial))) prm.beta = old_beta;
    }
    if (!quad) continue;
    if (second) {
      const CsrMatrix a = quad->theta_matrix(prm);
      const std::vector<double> b = quad->theta_rhs(u, res.y, prm);
      const std::vector<int>& idx = quad->theta_index();
      std::vector<double> x(quad->theta_size(), 0.0);
      for (int i = 0; i < space.num_true(); ++i) {
        if (idx[i] >= 0) x[idx[i]] = res.theta[i];
      }
      sweep(a, b, x, theta_chol);
      std::vector<double> theta(space.num_true(), 0.0);
      for (int i = 0; i < space.num_true(); ++i) {
        if (idx[i] >= 0) theta[i] = x[idx[i]];
      }
      Evaluation trial = evaluate(space, problem, u, res.y, theta, prm, second, policy);
      if (accept(std::move(trial))) res.theta = std::move(theta);
    }
    {
      const CsrMatrix a = quad->flux_matrix(prm);
      const std::vector<double> b = quad->flux_rhs(u, res.theta, prm);
      FluxField y = res.y;
      sweep(a, b, y.coeffs, flux_chol);
      Evaluation trial = evaluate(space, problem, u, y, res.theta, prm, second, policy);
      if (accept(std::move(trial))) res.y = std::move(y);
    }
    if (options.rtol > 0.0 && before - ev.total <= options.rtol * before) break;
  }
  res.indicators = combine_terms(ev.terms, prm, second);
  return res;
}

}  // namespace

MajorantResult minimize_majorant1(const FeSpace& space, const ProblemSpec& problem,
                                  std::span<const double> u, const MajorantParams& params,
                                  const MinimizeOptions& options,
                                  const QuadraturePolicy& policy) {
  return minimize(space, problem, u, params, options, policy, false);
}

MajorantResult minimize_majorant2(const FeSpace& space, const ProblemSpec& problem,
                                  std::span<const double> u, const MajorantParams& params,
                                  const MinimizeOptions& options,
                                  const QuadraturePolicy& policy) {
  return minimize(space, problem, u, params, options, policy, true);
}

std::vector<Point> anisotropy_vectors(const FeSpace& space, const ProblemSpec& problem,
                                      std::span<const double> u, const FluxField& y,
                                      const QuadraturePolicy& policy) {
  const int D = space.dim();
  const int ta = D - 1;
  const std::vector<double> dt_h = recover_derivative(space, problem, u, ta, false);
  Sampler sampler(space, problem, u, &y, dt_h);
  QuadratureTable table(space.shapes(), D);
  std::vector<Point> out(space.num_elements());
  std::vector<Sample> pts;
  for (int e = 0; e < space.num_elements(); ++e) {
    const Brick b = space.mesh().brick(space.brick_id(e));
    sampler.sample(e, b,
                   table.volume(policy.points(problem, b, space.degree()),
                                policy.pieces(problem, b)),
                   false, pts);
    Point acc{};
    for (const Sample& s : pts) {
      for (int a = 0; a < ta; ++a) {
        const double m = s.y[a] - s.nu * s.gu[a];
        acc[a] += s.w * m * m;
      }
      const double m = s.th - s.gu[ta];
      acc[ta] += s.w * m * m;
    }
    for (int a = 0; a < D; ++a) out[e][a] = std::sqrt(acc[a]);
  }
  return out;
}

MajorantResult estimate(const FeSpace& space, const ProblemSpec& problem,
                        std::span<const double> u, const EstimatorConfig& config,
                        const QuadraturePolicy& policy) {
  const double c_f = config.c_f > 0.0 ? config.c_f : problem.friedrichs_constant();
  const MajorantParams prm =
      MajorantParams::make(config.delta, config.beta, config.mu, config.gamma, c_f);
  MajorantResult res = config.kind == MajorantKind::eta1
                           ? minimize_majorant1(space, problem, u, prm, config.minimize, policy)
                           : minimize_majorant2(space, problem, u, prm, config.minimize, policy);
  res.indicators.anisotropy = anisotropy_vectors(space, problem, u, res.y, policy);
  return res;
}

}  // namespace stfem
