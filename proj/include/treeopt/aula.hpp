#pragma once

#include "treeopt/gauss_newton.hpp"
#include "treeopt/nlp.hpp"

namespace treeopt {

/// One consensus coupling term  eta*(z[local] - target) + rho/2 (z[local] - target)^2.
struct ConsensusTerm {
  int local = -1;
  double target = 0.0;
  double eta = 0.0;
};

/// Augmented Lagrangian of an NlpProblem,
///
///   L(z) = w c(z) + lambda.g(z) + mu/2 |[g>0] o g(z)|^2
///        + kappa.h(z) + nu/2 |h(z)|^2  (+ consensus terms),
///
/// minimized by Gauss-Newton. The curvature model keeps the triplet structure
/// independent of the active set so sparse factorizations can reuse their
/// symbolic analysis.
class AulaObjective : public GnObjective {
 public:
  AulaObjective(const NlpProblem& problem, double cost_weight);

  void set_duals(Vec lambda, Vec kappa);
  void set_penalties(double mu, double nu);
  void set_consensus(std::vector<ConsensusTerm> terms, double rho);

  int dim() const override { return problem_->dim; }
  double eval(const Vec& z, Vec* grad) const override;
  void curvature(const Vec& z, std::vector<Triplet>& triplets) const override;
  bool prefers_sparse() const override { return problem_->sparsity.has_value(); }

 private:
  const NlpProblem* problem_;
  double weight_;
  Vec lambda_, kappa_;
  double mu_ = 1.0, nu_ = 1.0;
  std::vector<ConsensusTerm> consensus_;
  double rho_ = 0.0;
};

/// One AuLa outer iteration: inner minimization from z, then the clamped dual
/// update. Shared by the plain and the distributed solvers so that the
/// N = 1 distributed case reproduces the plain iterates exactly.
struct AulaStep {
  GnResult inner;
  double viol_g = 0.0;   // |[g>0] o g|
  double viol_h = 0.0;   // |h|
  double step_norm = 0.0;
  Vec g, h;
};
AulaStep aula_step(AulaObjective& objective, const NlpProblem& problem, double mu, double nu,
                   Vec& z, Vec& lambda, Vec& kappa, const SolverConfig& config);

/// Classic Augmented Lagrangian outer loop. Duals start at zero. A problem
/// without constraints routes directly to the unconstrained minimizer.
SolveResult aula_solve(const NlpProblem& problem, const Vec& z0, const SolverConfig& config);

struct KktCondition {
  std::string name;
  double residual = 0.0;
  bool pass = false;
};

struct KktReport {
  std::vector<KktCondition> conditions;
  double tol = 0.0;
  bool pass = false;

  double residual(const std::string& name) const;
};

/// Stationarity, primal feasibility, dual feasibility, complementary
/// slackness, each reported as a residual with a pass flag at `tol`.
KktReport check_kkt(const NlpProblem& problem, const SolveResult& result, double tol);

}  // namespace treeopt
