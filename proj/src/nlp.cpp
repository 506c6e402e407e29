#include "treeopt/nlp.hpp"

#include <algorithm>
#include <cmath>

namespace treeopt {

bool CouplingPattern::contains(int i, int j) const {
  if (i > j) std::swap(i, j);
  return std::find(pairs.begin(), pairs.end(), std::make_pair(i, j)) != pairs.end();
}

NlpProblem NlpProblem::from_residuals(int dim, int dim_residual, VectorEvaluator residuals) {
  NlpProblem p;
  p.dim = dim;
  p.dim_residual = dim_residual;
  p.residual_form = residuals;
  p.cost = [residuals = std::move(residuals), dim_residual](const Vec& z, Vec* grad) {
    Vec r(dim_residual);
    if (grad) {
      SpMat J;
      residuals(z, r, &J);
      *grad = 2.0 * (J.transpose() * r);
    } else {
      residuals(z, r, nullptr);
    }
    return r.squaredNorm();
  };
  return p;
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "Converged";
    case SolveStatus::MaxIterations: return "MaxIterations";
    case SolveStatus::LineSearchFailure: return "LineSearchFailure";
    case SolveStatus::NumericalFailure: return "NumericalFailure";
  }
  return "Unknown";
}

void SolverConfig::validate() const {
  if (mu <= 0 || nu <= 0) throw std::invalid_argument("penalty constants must be positive");
  if (eps_pri <= 0 || eps_opt <= 0) throw std::invalid_argument("tolerances must be positive");
  if (max_outer < 1 || max_inner < 1) throw std::invalid_argument("iteration limits must be >= 1");
  if (damping0 < 0) throw std::invalid_argument("damping0 must be nonnegative");
  if (armijo_c <= 0 || armijo_c >= 1) throw std::invalid_argument("armijo_c must be in (0,1)");
  if (step_shrink <= 0 || step_shrink >= 1)
    throw std::invalid_argument("step_shrink must be in (0,1)");
}

void write_history_csv(const std::vector<IterRecord>& history, std::ostream& os) {
  os << "iter,cost,viol_g,viol_h,step_norm\n";
  for (const IterRecord& r : history) {
    os << r.iter << ',' << r.cost << ',' << r.viol_g << ',' << r.viol_h << ',' << r.step_norm
       << '\n';
  }
}

Mat finite_difference_jacobian(const VectorEvaluator& f, int out_dim, const Vec& point,
                               double step) {
  if (step <= 0) throw std::invalid_argument("finite difference step must be positive");
  const int n = static_cast<int>(point.size());
  Mat J(out_dim, n);
  Vec plus(out_dim), minus(out_dim);
  Vec z = point;
  for (int j = 0; j < n; ++j) {
    const double zj = z[j];
    z[j] = zj + step;
    const double applied_plus = z[j];
    f(z, plus, nullptr);
    z[j] = zj - step;
    const double applied_minus = z[j];
    f(z, minus, nullptr);
    z[j] = zj;
    if (!plus.allFinite() || !minus.allFinite())
      throw NumericalError("non-finite evaluation in finite_difference_jacobian");
    // divide by the step that was actually applied after rounding
    J.col(j) = (plus - minus) / (applied_plus - applied_minus);
  }
  return J;
}

Vec finite_difference_gradient(const ScalarEvaluator& f, const Vec& point, double step) {
  if (step <= 0) throw std::invalid_argument("finite difference step must be positive");
  const int n = static_cast<int>(point.size());
  Vec g(n);
  Vec z = point;
  for (int j = 0; j < n; ++j) {
    const double zj = z[j];
    z[j] = zj + step;
    const double applied_plus = z[j];
    const double fp = f(z, nullptr);
    z[j] = zj - step;
    const double applied_minus = z[j];
    const double fm = f(z, nullptr);
    z[j] = zj;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericalError("non-finite evaluation in finite_difference_gradient");
    g[j] = (fp - fm) / (applied_plus - applied_minus);
  }
  return g;
}

double jacobian_fd_error(const VectorEvaluator& f, int out_dim, const Vec& point, double step) {
  Vec value(out_dim);
  SpMat J;
  f(point, value, &J);
  const Mat fd = finite_difference_jacobian(f, out_dim, point, step);
  const Mat analytic = Mat(J);
  double err = 0.0;
  for (int i = 0; i < out_dim; ++i)
    for (int j = 0; j < point.size(); ++j) {
      const double scale = std::max(1.0, std::abs(fd(i, j)));
      err = std::max(err, std::abs(analytic(i, j) - fd(i, j)) / scale);
    }
  return err;
}

}  // namespace treeopt
