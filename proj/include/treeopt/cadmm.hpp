#pragma once

#include "treeopt/daula.hpp"

namespace treeopt {

/// One C-ADMM iterate in stacked coordinates. x stacks the subproblem
/// variables, y is the consensus vector, kappa stacks the equality duals,
/// eta stacks the consensus duals (consensus_dim per subproblem).
struct CadmmIterate {
  Vec x;
  Vec y;
  Vec kappa;
  Vec eta;
};

struct CadmmTrace {
  std::vector<CadmmIterate> iterates;
  SolveStatus status = SolveStatus::MaxIterations;
  int iters = 0;
};

/// Two-block reference algorithm: the first block minimizes the stacked
/// augmented Lagrangian of all subproblems jointly, the second block is the
/// indicator of the consensus subspace, realized as its closed-form
/// projection/averaging solution. Equality constraints only.
CadmmTrace cadmm_solve(const StructuredProblem& problem, const std::vector<Vec>* init,
                       const DaulaConfig& config);

/// Lyapunov-style diagnostics: V^k = 1/nu |kappa^k - kappa*|^2
/// + 1/rho |eta^k - eta*|^2 + rho |y^k - y*|^2 over an iterate sequence, in
/// stacked coordinates (the consensus entries of y are replicated once per
/// contributing subproblem). Flags every k with V^{k+1} > V^k + 1e-10.
struct LyapunovReference {
  Vec kappa_star;
  Vec eta_star;
  Vec y_star;
};

struct LyapunovTrace {
  LyapunovReference reference;
  std::vector<double> V;
  std::vector<double> r;  // consensus residual norms |x_shared - y|
  std::vector<double> p;  // summed weighted costs
  std::vector<int> monotonicity_violations;
};

struct LyapunovInput {
  std::vector<Vec> kappa;     // stacked per iteration
  std::vector<Vec> eta;       // stacked per iteration
  std::vector<Vec> y;         // stacked (replicated per contributor)
  std::vector<Vec> x_shared;  // stacked shared entries of the first block
  std::vector<double> costs;  // summed weighted costs per iteration
};

LyapunovTrace lyapunov_trace(const LyapunovInput& input, const LyapunovReference& reference,
                             double nu, double rho);

/// Maps a recorded distributed-solver trace into the stacked coordinates used
/// by the diagnostics above.
LyapunovInput stack_daula_trace(const StructuredProblem& problem, const DaulaState& state);

}  // namespace treeopt
