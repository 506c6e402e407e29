#include "treeopt/aula.hpp"

#include <cmath>

namespace treeopt {

namespace {
constexpr double kInnerTolerance = 0.01;
}

AulaObjective::AulaObjective(const NlpProblem& problem, double cost_weight)
    : problem_(&problem), weight_(cost_weight) {
  lambda_ = Vec::Zero(problem.dim_ineq);
  kappa_ = Vec::Zero(problem.dim_eq);
}

void AulaObjective::set_duals(Vec lambda, Vec kappa) {
  lambda_ = std::move(lambda);
  kappa_ = std::move(kappa);
}

void AulaObjective::set_penalties(double mu, double nu) {
  mu_ = mu;
  nu_ = nu;
}

void AulaObjective::set_consensus(std::vector<ConsensusTerm> terms, double rho) {
  consensus_ = std::move(terms);
  rho_ = rho;
}

double AulaObjective::eval(const Vec& z, Vec* grad) const {
  const NlpProblem& p = *problem_;
  double value = 0.0;
  if (grad) grad->setZero(p.dim);

  if (weight_ != 0.0) {
    if (grad) {
      Vec gc;
      value += weight_ * p.cost(z, &gc);
      *grad += weight_ * gc;
    } else {
      value += weight_ * p.cost(z, nullptr);
    }
  }

  if (p.dim_ineq > 0) {
    Vec g(p.dim_ineq);
    SpMat Jg;
    p.ineq(z, g, grad ? &Jg : nullptr);
    // centered C1 inequality term: penalty active while lambda + mu g >= 0
    Vec coeff = Vec::Zero(p.dim_ineq);
    for (int i = 0; i < p.dim_ineq; ++i) {
      const double slope = lambda_[i] + mu_ * g[i];
      if (slope > 0.0) {
        value += lambda_[i] * g[i] + 0.5 * mu_ * g[i] * g[i];
        coeff[i] = slope;
      } else {
        value += -0.5 * lambda_[i] * lambda_[i] / mu_;
      }
    }
    if (grad) *grad += Jg.transpose() * coeff;
  }

  if (p.dim_eq > 0) {
    Vec h(p.dim_eq);
    SpMat Jh;
    p.eq(z, h, grad ? &Jh : nullptr);
    value += kappa_.dot(h) + 0.5 * nu_ * h.squaredNorm();
    if (grad) *grad += Jh.transpose() * (kappa_ + nu_ * h);
  }

  for (const ConsensusTerm& t : consensus_) {
    const double delta = z[t.local] - t.target;
    value += t.eta * delta + 0.5 * rho_ * delta * delta;
    if (grad) (*grad)[t.local] += t.eta + rho_ * delta;
  }

  return value;
}

void AulaObjective::curvature(const Vec& z, std::vector<Triplet>& triplets) const {
  const NlpProblem& p = *problem_;

  if (weight_ != 0.0 && p.has_residual_form()) {
    Vec r(p.dim_residual);
    SpMat J;
    p.residual_form(z, r, &J);
    SpMat H = SpMat(2.0 * weight_ * (J.transpose() * J));
    for (int k = 0; k < H.outerSize(); ++k)
      for (SpMat::InnerIterator it(H, k); it; ++it)
        triplets.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  }

  if (p.dim_ineq > 0) {
    Vec g(p.dim_ineq);
    SpMat Jg;
    p.ineq(z, g, &Jg);
    // Scale rows by the active-set indicator; the structure stays fixed.
    Vec scale(p.dim_ineq);
    for (int i = 0; i < p.dim_ineq; ++i)
      scale[i] = (lambda_[i] + mu_ * g[i] > 0.0) ? std::sqrt(mu_) : 0.0;
    SpMat Js = scale.asDiagonal() * Jg;
    SpMat H = SpMat(Js.transpose() * Js);
    for (int k = 0; k < H.outerSize(); ++k)
      for (SpMat::InnerIterator it(H, k); it; ++it)
        triplets.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  }

  if (p.dim_eq > 0) {
    Vec h(p.dim_eq);
    SpMat Jh;
    p.eq(z, h, &Jh);
    SpMat H = SpMat(nu_ * (Jh.transpose() * Jh));
    for (int k = 0; k < H.outerSize(); ++k)
      for (SpMat::InnerIterator it(H, k); it; ++it)
        triplets.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  }

  for (const ConsensusTerm& t : consensus_) triplets.emplace_back(t.local, t.local, rho_);
}

AulaStep aula_step(AulaObjective& objective, const NlpProblem& problem, double mu, double nu,
                   Vec& z, Vec& lambda, Vec& kappa, const SolverConfig& config) {
  AulaStep step;
  objective.set_duals(lambda, kappa);
  objective.set_penalties(mu, nu);

  // the inner minimization runs tighter than the outer Eq.-6 thresholds so
  // that crude inner minima cannot stall the dual updates
  SolverConfig inner = config;
  inner.eps_opt = kInnerTolerance * config.eps_opt;

  const Vec z_prev = z;
  step.inner = gn_minimize(objective, z, inner);
  z = step.inner.z;
  step.step_norm = (z - z_prev).norm();

  if (problem.dim_ineq > 0) {
    step.g.resize(problem.dim_ineq);
    problem.ineq(z, step.g, nullptr);
    double v = 0.0;
    for (int i = 0; i < problem.dim_ineq; ++i) {
      if (step.g[i] > 0.0) v += step.g[i] * step.g[i];
      lambda[i] = std::max(0.0, lambda[i] + mu * step.g[i]);
    }
    step.viol_g = std::sqrt(v);
  }
  if (problem.dim_eq > 0) {
    step.h.resize(problem.dim_eq);
    problem.eq(z, step.h, nullptr);
    step.viol_h = step.h.norm();
    kappa += nu * step.h;
  }
  return step;
}

SolveResult aula_solve(const NlpProblem& problem, const Vec& z0, const SolverConfig& config) {
  config.validate();
  SolveResult result;
  result.lambda = Vec::Zero(problem.dim_ineq);
  result.kappa = Vec::Zero(problem.dim_eq);

  if (problem.dim_ineq == 0 && problem.dim_eq == 0) {
    // Degenerate input: no constraints, plain unconstrained minimization.
    AulaObjective objective(problem, 1.0);
    GnResult gn = gn_minimize(objective, z0, config);
    result.z = gn.z;
    result.status = gn.status;
    result.outer_iters = 1;
    result.history.push_back({1, gn.cost, 0.0, 0.0, 0.0});
    return result;
  }

  AulaObjective objective(problem, 1.0);
  result.z = z0;
  double mu = config.mu, nu = config.nu;

  for (int outer = 1; outer <= config.max_outer; ++outer) {
    AulaStep step =
        aula_step(objective, problem, mu, nu, result.z, result.lambda, result.kappa, config);
    result.outer_iters = outer;
    result.history.push_back(
        {outer, problem.cost(result.z, nullptr), step.viol_g, step.viol_h, step.step_norm});

    if (step.inner.status == SolveStatus::NumericalFailure) {
      result.status = SolveStatus::NumericalFailure;
      return result;
    }

    const bool feasible = step.viol_g <= config.eps_pri && step.viol_h <= config.eps_pri;
    if (feasible && step.step_norm <= config.eps_opt) {
      result.status = SolveStatus::Converged;
      return result;
    }
    if (step.inner.status == SolveStatus::LineSearchFailure && step.step_norm == 0.0 && !feasible) {
      // stuck at an infeasible stationary point of the current Lagrangian
      result.status = SolveStatus::LineSearchFailure;
      return result;
    }

    if (config.penalty_growth) {
      mu = std::min(mu * config.growth_factor, config.penalty_max);
      nu = std::min(nu * config.growth_factor, config.penalty_max);
    }
  }
  result.status = SolveStatus::MaxIterations;
  return result;
}

double KktReport::residual(const std::string& name) const {
  for (const KktCondition& c : conditions)
    if (c.name == name) return c.residual;
  throw std::invalid_argument("unknown KKT condition: " + name);
}

KktReport check_kkt(const NlpProblem& problem, const SolveResult& result, double tol) {
  KktReport report;
  report.tol = tol;

  Vec grad;
  problem.cost(result.z, &grad);
  Vec stationarity = grad;
  double primal_g = 0.0, comp_slack = 0.0, dual_feas = 0.0;

  if (problem.dim_ineq > 0) {
    Vec g(problem.dim_ineq);
    SpMat Jg;
    problem.ineq(result.z, g, &Jg);
    stationarity += Jg.transpose() * result.lambda;
    for (int i = 0; i < problem.dim_ineq; ++i) {
      primal_g = std::max(primal_g, g[i]);
      comp_slack = std::max(comp_slack, std::abs(result.lambda[i] * g[i]));
      dual_feas = std::max(dual_feas, -result.lambda[i]);
    }
  }
  double primal_h = 0.0;
  if (problem.dim_eq > 0) {
    Vec h(problem.dim_eq);
    SpMat Jh;
    problem.eq(result.z, h, &Jh);
    stationarity += Jh.transpose() * result.kappa;
    primal_h = h.lpNorm<Eigen::Infinity>();
  }

  auto add = [&](const std::string& name, double residual) {
    report.conditions.push_back({name, residual, residual <= tol});
  };
  add("stationarity", stationarity.lpNorm<Eigen::Infinity>());
  add("primal_ineq", std::max(0.0, primal_g));
  add("primal_eq", primal_h);
  add("dual_feasibility", std::max(0.0, dual_feas));
  add("complementary_slackness", comp_slack);

  report.pass = true;
  for (const KktCondition& c : report.conditions) report.pass = report.pass && c.pass;
  return report;
}

}  // namespace treeopt
