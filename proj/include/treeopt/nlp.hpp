#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

namespace treeopt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Scalar objective: returns value, fills gradient when requested.
using ScalarEvaluator = std::function<double(const Vec& z, Vec* grad)>;

/// Vector-valued evaluator (constraints, residuals): fills value, and the
/// Jacobian when a non-null pointer is passed.
using VectorEvaluator = std::function<void(const Vec& z, Vec& value, SpMat* jac)>;

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Variable-index pairs (i <= j) that may carry nonzero Hessian entries.
struct CouplingPattern {
  int dim = 0;
  std::vector<std::pair<int, int>> pairs;

  bool contains(int i, int j) const;
};

/// Generic smooth constrained problem
///
///   min c(z)  s.t.  g(z) <= 0,  h(z) = 0,     z in R^dim
///
/// residual_form, when set, provides r(z) with c(z) == |r(z)|^2 and is used
/// for the Gauss-Newton Hessian approximation. Evaluators must be pure.
struct NlpProblem {
  int dim = 0;
  int dim_ineq = 0;
  int dim_eq = 0;

  ScalarEvaluator cost;
  VectorEvaluator ineq;       // dim_ineq rows, empty when dim_ineq == 0
  VectorEvaluator eq;         // dim_eq rows, empty when dim_eq == 0
  VectorEvaluator residual_form;  // optional
  int dim_residual = 0;

  std::optional<CouplingPattern> sparsity;

  bool has_residual_form() const { return static_cast<bool>(residual_form); }

  /// Builds a problem whose cost is |r(z)|^2 from the residual evaluator.
  static NlpProblem from_residuals(int dim, int dim_residual, VectorEvaluator residuals);
};

enum class SolveStatus { Converged, MaxIterations, LineSearchFailure, NumericalFailure };

const char* to_string(SolveStatus s);

enum class HessianMode { Auto, Dense, Sparse };

struct SolverConfig {
  double mu = 1.0;           // inequality penalty
  double nu = 1.0;           // equality penalty
  double eps_pri = 1e-3;     // constraint tolerance
  double eps_opt = 1e-4;     // stationarity / step tolerance
  int max_outer = 50;
  int max_inner = 100;
  double damping0 = 0.0;     // initial Hessian regularization
  double armijo_c = 0.01;
  double step_shrink = 0.5;

  // Disabled by default; geometric penalty growth for stiff problems.
  bool penalty_growth = false;
  double growth_factor = 2.0;
  double penalty_max = 1e4;

  HessianMode hessian = HessianMode::Auto;

  void validate() const;
};

struct IterRecord {
  int iter = 0;
  double cost = 0.0;
  double viol_g = 0.0;
  double viol_h = 0.0;
  double step_norm = 0.0;
};

struct SolveResult {
  Vec z;
  Vec lambda;  // inequality multipliers, entrywise >= 0
  Vec kappa;   // equality multipliers
  SolveStatus status = SolveStatus::MaxIterations;
  int outer_iters = 0;
  std::vector<IterRecord> history;
};

/// Debug dump, columns: iter,cost,viol_g,viol_h,step_norm
void write_history_csv(const std::vector<IterRecord>& history, std::ostream& os);

/// Central-difference Jacobian of a vector evaluator, entry (i,j) =
/// (f_i(z+h e_j) - f_i(z-h e_j)) / (2h). Throws NumericalError on non-finite
/// evaluations.
Mat finite_difference_jacobian(const VectorEvaluator& f, int out_dim, const Vec& point,
                               double step);

/// Central-difference gradient of a scalar evaluator.
Vec finite_difference_gradient(const ScalarEvaluator& f, const Vec& point, double step);

/// Max relative deviation between the analytic Jacobian of `f` and central
/// finite differences at `point` (relative to max(1, |fd entry|)).
double jacobian_fd_error(const VectorEvaluator& f, int out_dim, const Vec& point, double step);

}  // namespace treeopt
