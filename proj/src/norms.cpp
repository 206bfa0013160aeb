#include "stfem/norms.hpp"

#include <cmath>

namespace stfem {

FeFunction::FeFunction(const FeSpace& space, std::span<const double> true_coeffs)
    : space_(&space), full_(space.expand(true_coeffs)) {}

void FeFunction::sample(int e, const Brick& b, const QuadPoints& qp,
                        std::span<PointValues> out) const {
  const Tabulation& tab = qp.tab;
  const int nb = tab.num_basis;
  const int D = b.dim;
  const auto nodes = space_->element_nodes(e);
  double local[729];
  for (int i = 0; i < nb; ++i) local[i] = full_[nodes[i]];
  for (int q = 0; q < tab.num_points; ++q) {
    PointValues pv;
    for (int i = 0; i < nb; ++i) {
      const double c = local[i];
      if (c == 0.0) continue;
      pv.value += c * tab.v(q, i);
      for (int a = 0; a < D; ++a) {
        pv.grad[a] += c * tab.dv(a, q, i);
        pv.second[a] += c * tab.ddv(a, q, i);
      }
    }
    for (int a = 0; a < D; ++a) {
      pv.grad[a] /= b.sizes[a];
      pv.second[a] /= b.sizes[a] * b.sizes[a];
    }
    out[q] = pv;
  }
}

void AnalyticField::sample(int, const Brick& b, const QuadPoints& qp,
                           std::span<PointValues> out) const {
  for (int q = 0; q < qp.rule.size(); ++q) {
    const Point x = map_to_brick(b, qp.rule.points[q]);
    PointValues pv;
    pv.value = f_.value ? f_.value(x) : 0.0;
    if (f_.gradient) pv.grad = f_.gradient(x);
    if (f_.second) pv.second = f_.second(x);
    out[q] = pv;
  }
}

void DifferenceField::sample(int e, const Brick& b, const QuadPoints& qp,
                             std::span<PointValues> out) const {
  std::vector<PointValues> tmp(out.size());
  a_.sample(e, b, qp, out);
  b_.sample(e, b, qp, tmp);
  for (std::size_t q = 0; q < out.size(); ++q) {
    out[q].value -= tmp[q].value;
    for (int a = 0; a < kMaxDim; ++a) {
      out[q].grad[a] -= tmp[q].grad[a];
      out[q].second[a] -= tmp[q].second[a];
    }
  }
}

NormParts norm_parts(const FeSpace& space, const ProblemSpec& problem, const Field& w,
                     const StabilizationParams& stab, const QuadraturePolicy& policy,
                     bool with_star_terms) {
  NormParts parts;
  QuadratureTable table(space.shapes(), space.dim());
  const int D = space.dim();
  const int ta = D - 1;
  const Lattice top = space.mesh().root_cells()[ta] * kRootSpan;
  std::vector<PointValues> vals;
  for (int e = 0; e < space.num_elements(); ++e) {
    const int id = space.brick_id(e);
    const Brick b = space.mesh().brick(id);
    const double s = stab.weight(b);
    if (with_star_terms) {
      require(s > 0.0, ErrorKind::invalid_argument,
              "the starred norm requires a positive stabilization weight");
    }
    const int q = policy.points(problem, b, space.degree());
    const int pieces = policy.pieces(problem, b);
    const QuadPoints& qp = table.volume(q, pieces);
    vals.resize(qp.rule.size());
    w.sample(e, b, qp, vals);
    const double vol = b.volume();
    for (int k = 0; k < qp.rule.size(); ++k) {
      const Point x = map_to_brick(b, qp.rule.points[k]);
      const double nu = problem.nu(x);
      const double wq = qp.rule.weights[k] * vol;
      const PointValues& pv = vals[k];
      double g2 = 0.0;
      for (int a = 0; a < ta; ++a) g2 += pv.grad[a] * pv.grad[a];
      parts.grad += wq * nu * g2;
      parts.dt += wq * s * pv.grad[ta] * pv.grad[ta];
      if (with_star_terms) {
        parts.l2_weighted += wq * pv.value * pv.value / s;
        const Point gnu = problem.nu.gradient(x);
        double div = 0.0;
        for (int a = 0; a < ta; ++a) div += nu * pv.second[a] + gnu[a] * pv.grad[a];
        parts.div_weighted += wq * s * div * div;
      }
    }
    if (space.mesh().box(id).hi[ta] == top) {
      const QuadPoints& fq = table.top_face(q, pieces);
      vals.resize(fq.rule.size());
      w.sample(e, b, fq, vals);
      const double area = vol / b.sizes[ta];
      for (int k = 0; k < fq.rule.size(); ++k) {
        parts.terminal += fq.rule.weights[k] * area * vals[k].value * vals[k].value;
      }
    }
  }
  return parts;
}

double norm_h(const FeSpace& space, const ProblemSpec& problem, const Field& w,
              const StabilizationParams& stab, const QuadraturePolicy& policy) {
  const NormParts p = norm_parts(space, problem, w, stab, policy, false);
  return std::sqrt(0.5 * p.terminal + p.dt + p.grad);
}

double norm_h_star(const FeSpace& space, const ProblemSpec& problem, const Field& w,
                   const StabilizationParams& stab, const QuadraturePolicy& policy) {
  const NormParts p = norm_parts(space, problem, w, stab, policy, true);
  return std::sqrt(0.5 * p.terminal + p.dt + p.grad + p.l2_weighted + p.div_weighted);
}

double triple_norm(const FeSpace& space, const ProblemSpec& problem, const Field& w, double eps,
                   double kappa, const QuadraturePolicy& policy) {
  require(eps >= 0.0 && kappa >= 0.0, ErrorKind::invalid_argument,
          "triple norm weights must be non-negative");
  StabilizationParams none;
  none.theta0 = 0.0;
  const NormParts p = norm_parts(space, problem, w, none, policy, false);
  return std::sqrt(kappa * p.grad + eps * p.terminal);
}

double l2_norm(const FeSpace& space, const ProblemSpec& problem, const Field& w,
               const QuadraturePolicy& policy) {
  QuadratureTable table(space.shapes(), space.dim());
  std::vector<PointValues> vals;
  double sum = 0.0;
  for (int e = 0; e < space.num_elements(); ++e) {
    const Brick b = space.mesh().brick(space.brick_id(e));
    const QuadPoints& qp =
        table.volume(policy.points(problem, b, space.degree()), policy.pieces(problem, b));
    vals.resize(qp.rule.size());
    w.sample(e, b, qp, vals);
    for (int k = 0; k < qp.rule.size(); ++k) {
      sum += qp.rule.weights[k] * b.volume() * vals[k].value * vals[k].value;
    }
  }
  return std::sqrt(sum);
}

}  // namespace stfem
