#pragma once

#include "treeopt/aula.hpp"
#include "treeopt/structured.hpp"

namespace treeopt {

struct DaulaConfig {
  SolverConfig inner;
  double rho = 1.0;       // consensus penalty
  double xi_pri = 1e-3;   // consensus primal threshold
  double xi_dual = 1e-4;  // consensus dual threshold
  int max_outer = 50;
  bool parallel = false;
  bool record_iterates = false;
  bool run_to_max = false;  // disable early termination (trace studies)

  void validate() const;
};

struct DaulaResiduals {
  int iter = 0;
  double viol_g_max = 0.0;
  double viol_h_max = 0.0;
  double step_norm_max = 0.0;
  double consensus_pri = 0.0;
  double consensus_dual = 0.0;
};

struct DaulaState {
  std::vector<Vec> z;
  Vec z_tilde;
  std::vector<Vec> lambda, kappa, eta;
  int iter = 0;
  std::vector<DaulaResiduals> residuals;

  // filled when record_iterates is set; entry k belongs to outer iteration k+1
  std::vector<std::vector<Vec>> z_trace;
  std::vector<Vec> z_tilde_trace;
  std::vector<std::vector<Vec>> kappa_trace;
  std::vector<std::vector<Vec>> eta_trace;
};

struct SubproblemReport {
  SolveStatus status = SolveStatus::MaxIterations;
  int inner_iters = 0;
  double cost = 0.0;
};

struct DaulaResult {
  DaulaState state;
  std::vector<SubproblemReport> subproblem_reports;
  SolveStatus status = SolveStatus::MaxIterations;
  bool active_set_stable = true;  // inequality active sets of the final two iterations agree
  int inner_early_stops = 0;      // inner solves that returned at max_inner
};

/// Distributed Augmented Lagrangian over loosely coupled subproblems. Duals
/// start at zero; `init` optionally warm-starts the primal iterates. With a
/// single subproblem the consensus machinery drops out and the iterates
/// reproduce aula_solve exactly. Results are identical with parallel on/off.
DaulaResult daula_solve(const StructuredProblem& problem, const std::vector<Vec>* init,
                        const DaulaConfig& config);

/// Columns: iter,viol_g_max,viol_h_max,step_norm_max,consensus_pri,consensus_dual
void write_residuals_csv(const std::vector<DaulaResiduals>& residuals, std::ostream& os);

}  // namespace treeopt
