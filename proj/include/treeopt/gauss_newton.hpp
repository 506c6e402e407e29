#pragma once

#include "treeopt/nlp.hpp"

namespace treeopt {

/// Unconstrained smooth objective with a Gauss-Newton curvature model.
/// curvature() appends symmetric triplets approximating the Hessian; the
/// triplet *structure* must not depend on z (values may).
class GnObjective {
 public:
  virtual ~GnObjective() = default;
  virtual int dim() const = 0;
  virtual double eval(const Vec& z, Vec* grad) const = 0;
  virtual void curvature(const Vec& z, std::vector<Triplet>& triplets) const = 0;
  /// Sparse factorization only pays off when the objective declares a pattern.
  virtual bool prefers_sparse() const { return false; }
};

/// Least-squares objective |r(z)|^2 with curvature 2 J^T J.
class LeastSquaresObjective : public GnObjective {
 public:
  LeastSquaresObjective(int dim, int dim_residual, VectorEvaluator residuals, bool sparse = false)
      : dim_(dim), dim_r_(dim_residual), residuals_(std::move(residuals)), sparse_(sparse) {}

  int dim() const override { return dim_; }
  double eval(const Vec& z, Vec* grad) const override;
  void curvature(const Vec& z, std::vector<Triplet>& triplets) const override;
  bool prefers_sparse() const override { return sparse_; }

 private:
  int dim_;
  int dim_r_;
  VectorEvaluator residuals_;
  bool sparse_;
};

struct GnResult {
  Vec z;
  SolveStatus status = SolveStatus::MaxIterations;
  int iters = 0;
  double cost = 0.0;
  double grad_norm = 0.0;
};

/// Damped Gauss-Newton descent with Armijo backtracking. Terminates when the
/// gradient norm or the accepted step norm drops below eps_opt. Accepted
/// steps never increase the objective.
GnResult gn_minimize(const GnObjective& objective, const Vec& z0, const SolverConfig& config);

/// Spec entry point: minimizes |r(z)|^2 given in residual/Jacobian form.
GnResult gauss_newton_minimize(const NlpProblem& objective, const Vec& z0,
                               const SolverConfig& config);

}  // namespace treeopt
