#include "treeopt/gauss_newton.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>

namespace treeopt {

double LeastSquaresObjective::eval(const Vec& z, Vec* grad) const {
  Vec r(dim_r_);
  if (grad) {
    SpMat J;
    residuals_(z, r, &J);
    *grad = 2.0 * (J.transpose() * r);
  } else {
    residuals_(z, r, nullptr);
  }
  return r.squaredNorm();
}

void LeastSquaresObjective::curvature(const Vec& z, std::vector<Triplet>& triplets) const {
  Vec r(dim_r_);
  SpMat J;
  residuals_(z, r, &J);
  SpMat H = SpMat(2.0 * (J.transpose() * J));
  for (int k = 0; k < H.outerSize(); ++k)
    for (SpMat::InnerIterator it(H, k); it; ++it)
      triplets.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
}

namespace {

constexpr int kMaxLineSearch = 30;
constexpr int kMaxDampingRetries = 25;
constexpr double kDampingGrow = 10.0;
constexpr double kDampingShrink = 0.3;
constexpr double kDampingFloor = 1e-8;

class HessianSolver {
 public:
  HessianSolver(int n, bool sparse) : n_(n), sparse_(sparse) {}

  // Returns false when the factorization is unusable.
  bool factor(const std::vector<Triplet>& triplets, double damping) {
    if (sparse_) {
      SpMat H(n_, n_);
      H.setFromTriplets(triplets.begin(), triplets.end());
      for (int i = 0; i < n_; ++i) H.coeffRef(i, i) += damping;
      H.makeCompressed();
      if (!analyzed_) {
        sparse_ldlt_.analyzePattern(H);
        analyzed_ = true;
      }
      sparse_ldlt_.factorize(H);
      if (sparse_ldlt_.info() != Eigen::Success) return false;
      // LDLT of an indefinite model would produce negative diagonal entries.
      return (sparse_ldlt_.vectorD().array() > 0.0).all();
    }
    Mat H = Mat::Zero(n_, n_);
    for (const Triplet& t : triplets) H(t.row(), t.col()) += t.value();
    H.diagonal().array() += damping;
    dense_llt_.compute(H);
    return dense_llt_.info() == Eigen::Success;
  }

  Vec solve(const Vec& rhs) const {
    return sparse_ ? Vec(sparse_ldlt_.solve(rhs)) : Vec(dense_llt_.solve(rhs));
  }

 private:
  int n_;
  bool sparse_;
  bool analyzed_ = false;
  Eigen::SimplicialLDLT<SpMat> sparse_ldlt_;
  Eigen::LLT<Mat> dense_llt_;
};

}  // namespace

GnResult gn_minimize(const GnObjective& objective, const Vec& z0, const SolverConfig& config) {
  config.validate();
  const int n = objective.dim();
  const bool sparse = config.hessian == HessianMode::Sparse ||
                      (config.hessian == HessianMode::Auto && objective.prefers_sparse());

  GnResult result;
  result.z = z0;

  HessianSolver solver(n, sparse);
  std::vector<Triplet> triplets;
  Vec grad(n);
  double damping = config.damping0;

  double f = objective.eval(result.z, &grad);
  if (!std::isfinite(f) || !grad.allFinite()) {
    result.status = SolveStatus::NumericalFailure;
    return result;
  }

  for (int it = 0; it < config.max_inner; ++it) {
    result.iters = it;
    result.cost = f;
    result.grad_norm = grad.norm();
    if (result.grad_norm <= config.eps_opt) {
      result.status = SolveStatus::Converged;
      return result;
    }

    triplets.clear();
    objective.curvature(result.z, triplets);

    // Factor, inflating the damping until the model is positive definite and
    // the step is a descent direction.
    Vec step;
    bool ok = false;
    for (int retry = 0; retry < kMaxDampingRetries; ++retry) {
      if (solver.factor(triplets, damping)) {
        step = solver.solve(-grad);
        if (step.allFinite() && grad.dot(step) < 0) {
          ok = true;
          break;
        }
      }
      damping = std::max(damping * kDampingGrow, kDampingFloor);
    }
    if (!ok) {
      result.status = SolveStatus::NumericalFailure;
      return result;
    }

    const double directional = grad.dot(step);
    double alpha = 1.0;
    bool accepted = false;
    double f_new = 0.0;
    Vec z_new;
    for (int ls = 0; ls < kMaxLineSearch; ++ls) {
      z_new = result.z + alpha * step;
      f_new = objective.eval(z_new, nullptr);
      if (std::isfinite(f_new) && f_new <= f + config.armijo_c * alpha * directional) {
        accepted = true;
        break;
      }
      alpha *= config.step_shrink;
    }
    if (!accepted) {
      result.status = SolveStatus::LineSearchFailure;
      return result;
    }

    const double step_norm = alpha * step.norm();
    result.z = z_new;
    f = objective.eval(result.z, &grad);
    if (!std::isfinite(f) || !grad.allFinite()) {
      result.status = SolveStatus::NumericalFailure;
      return result;
    }
    damping = damping < kDampingFloor ? 0.0 : damping * kDampingShrink;

    if (step_norm <= config.eps_opt) {
      result.iters = it + 1;
      result.cost = f;
      result.grad_norm = grad.norm();
      result.status = SolveStatus::Converged;
      return result;
    }
  }

  result.cost = f;
  result.grad_norm = grad.norm();
  result.iters = config.max_inner;
  result.status = SolveStatus::MaxIterations;
  return result;
}

GnResult gauss_newton_minimize(const NlpProblem& objective, const Vec& z0,
                               const SolverConfig& config) {
  if (!objective.has_residual_form())
    throw std::invalid_argument("gauss_newton_minimize requires a residual form");
  LeastSquaresObjective ls(objective.dim, objective.dim_residual, objective.residual_form,
                           objective.sparsity.has_value());
  return gn_minimize(ls, z0, config);
}

}  // namespace treeopt
