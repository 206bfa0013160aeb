#pragma once

#include <span>
#include <vector>

#include "stfem/assembly.hpp"
#include "stfem/fespace.hpp"
#include "stfem/problem.hpp"

namespace stfem {

/// Anything that can be sampled on the quadrature points of an element of a space.
class Field {
 public:
  virtual ~Field() = default;
  virtual void sample(int e, const Brick& b, const QuadPoints& qp,
                      std::span<PointValues> out) const = 0;
};

/// Finite element function given by true coefficients.
class FeFunction final : public Field {
 public:
  FeFunction(const FeSpace& space, std::span<const double> true_coeffs);
  const FeSpace& space() const { return *space_; }
  std::span<const double> full() const { return full_; }
  void sample(int e, const Brick& b, const QuadPoints& qp,
              std::span<PointValues> out) const override;

 private:
  const FeSpace* space_;
  std::vector<double> full_;
};

class AnalyticField final : public Field {
 public:
  explicit AnalyticField(AnalyticFunction f) : f_(std::move(f)) {}
  void sample(int e, const Brick& b, const QuadPoints& qp,
              std::span<PointValues> out) const override;

 private:
  AnalyticFunction f_;
};

/// a - b
class DifferenceField final : public Field {
 public:
  DifferenceField(const Field& a, const Field& b) : a_(a), b_(b) {}
  void sample(int e, const Brick& b, const QuadPoints& qp,
              std::span<PointValues> out) const override;

 private:
  const Field& a_;
  const Field& b_;
};

/// Component pieces of the discrete energy norms, already squared and summed.
struct NormParts {
  double terminal = 0.0;   // ||w||^2 on Sigma_T
  double dt = 0.0;         // sum_K theta_K h_K ||dt w||^2_K
  double grad = 0.0;       // ||nu^{1/2} grad_x w||^2_Q
  double l2_weighted = 0.0;   // sum_K (theta_K h_K)^{-1} ||w||^2_K
  double div_weighted = 0.0;  // sum_K theta_K h_K ||div_x(nu grad_x w)||^2_K
};

NormParts norm_parts(const FeSpace& space, const ProblemSpec& problem, const Field& w,
                     const StabilizationParams& stab, const QuadraturePolicy& policy = {},
                     bool with_star_terms = false);

/// (1/2 ||w||^2_{Sigma_T} + sum_K [theta_K h_K ||dt w||^2 + ||nu^{1/2} grad_x w||^2])^{1/2}
double norm_h(const FeSpace& space, const ProblemSpec& problem, const Field& w,
              const StabilizationParams& stab, const QuadraturePolicy& policy = {});

/// ||w||_h augmented by (theta_K h_K)^{-1} ||w||^2_K and theta_K h_K ||div_x(nu grad_x w)||^2_K.
double norm_h_star(const FeSpace& space, const ProblemSpec& problem, const Field& w,
                   const StabilizationParams& stab, const QuadraturePolicy& policy = {});

/// (kappa ||sqrt(nu) grad_x w||^2_Q + eps ||w||^2_{Sigma_T})^{1/2}
double triple_norm(const FeSpace& space, const ProblemSpec& problem, const Field& w, double eps,
                   double kappa, const QuadraturePolicy& policy = {});

double l2_norm(const FeSpace& space, const ProblemSpec& problem, const Field& w,
               const QuadraturePolicy& policy = {});

}  // namespace stfem
