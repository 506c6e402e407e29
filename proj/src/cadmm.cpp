#include "treeopt/cadmm.hpp"

#include <cmath>

namespace treeopt {

namespace {

// (subproblem, local index) pairs contributing to each consensus entry, in
// stacked coordinates.
struct ConsensusIndex {
  std::vector<std::vector<std::pair<int, int>>> contributors;  // per entry: (m, stacked idx)
};

ConsensusIndex build_index(const StructuredProblem& problem, const std::vector<int>& offsets) {
  ConsensusIndex index;
  index.contributors.resize(problem.shared.consensus_dim);
  for (int m = 0; m < problem.num_subproblems(); ++m) {
    const auto& list = problem.shared.local_index[m];
    for (int j = 0; j < problem.shared.consensus_dim; ++j)
      if (list[j] >= 0) index.contributors[j].push_back({m, offsets[m] + list[j]});
  }
  return index;
}

}  // namespace

CadmmTrace cadmm_solve(const StructuredProblem& problem, const std::vector<Vec>* init,
                       const DaulaConfig& config) {
  problem.validate(false);
  config.validate();
  for (const Subproblem& s : problem.subproblems)
    if (s.nlp.dim_ineq > 0)
      throw std::invalid_argument("cadmm_solve handles equality constraints only");

  const int N = problem.num_subproblems();
  const int consensus_dim = problem.shared.consensus_dim;
  StackedProblem stacked = stack_subproblems(problem);
  ConsensusIndex index = build_index(problem, stacked.offsets);

  CadmmTrace trace;
  Vec x = Vec::Zero(stacked.nlp.dim);
  if (init) {
    for (int m = 0; m < N; ++m) x.segment(stacked.offsets[m], (*init)[m].size()) = (*init)[m];
  }
  Vec kappa = Vec::Zero(stacked.nlp.dim_eq);
  // eta is one consensus_dim block per subproblem; entries without
  // contribution stay zero.
  Mat eta = Mat::Zero(consensus_dim, N);

  // Initial consensus from the averaged shared entries, matching the
  // distributed solver's initialization.
  Vec y(consensus_dim);
  for (int j = 0; j < consensus_dim; ++j) {
    double sum = 0.0;
    for (const auto& [m, idx] : index.contributors[j]) sum += x[idx];
    y[j] = sum / static_cast<double>(index.contributors[j].size());
  }

  AulaObjective objective(stacked.nlp, 1.0);
  const double nu = config.inner.nu, rho = config.rho;

  auto record = [&]() {
    CadmmIterate it;
    it.x = x;
    it.y = y;
    it.kappa = kappa;
    it.eta = Vec(Eigen::Map<const Vec>(eta.data(), eta.size()));
    trace.iterates.push_back(std::move(it));
  };

  Vec lambda_empty;
  for (int iter = 1; iter <= config.max_outer; ++iter) {
    trace.iters = iter;
    const Vec x_prev = x, y_prev = y;

    // First block: joint minimization over the stacked variables.
    std::vector<ConsensusTerm> terms;
    for (int j = 0; j < consensus_dim; ++j)
      for (const auto& [m, idx] : index.contributors[j]) terms.push_back({idx, y[j], eta(j, m)});
    objective.set_consensus(std::move(terms), rho);
    objective.set_duals(lambda_empty, kappa);
    objective.set_penalties(config.inner.mu, nu);
    GnResult gn = gn_minimize(objective, x, config.inner);
    if (gn.status == SolveStatus::NumericalFailure) {
      trace.status = SolveStatus::NumericalFailure;
      return trace;
    }
    x = gn.z;

    // Second block: the indicator of the consensus subspace has the
    // closed-form minimizer y_j = mean(x + eta/rho) over contributors.
    for (int j = 0; j < consensus_dim; ++j) {
      double sum = 0.0;
      for (const auto& [m, idx] : index.contributors[j]) sum += x[idx] + eta(j, m) / rho;
      y[j] = sum / static_cast<double>(index.contributors[j].size());
    }

    // Dual updates.
    Vec h(stacked.nlp.dim_eq);
    double viol_h = 0.0;
    if (stacked.nlp.dim_eq > 0) {
      stacked.nlp.eq(x, h, nullptr);
      kappa += nu * h;
      viol_h = h.norm();
    }
    double consensus_pri = 0.0;
    for (int j = 0; j < consensus_dim; ++j)
      for (const auto& [m, idx] : index.contributors[j]) {
        const double delta = x[idx] - y[j];
        eta(j, m) += rho * delta;
        consensus_pri = std::max(consensus_pri, std::abs(delta));
      }

    record();

    const bool converged = viol_h <= config.inner.eps_pri &&
                           (x - x_prev).norm() <= config.inner.eps_opt &&
                           consensus_pri <= config.xi_pri &&
                           (y - y_prev).norm() <= config.xi_dual;
    if (converged && !config.run_to_max) {
      trace.status = SolveStatus::Converged;
      return trace;
    }
  }
  trace.status = SolveStatus::MaxIterations;
  return trace;
}

LyapunovTrace lyapunov_trace(const LyapunovInput& input, const LyapunovReference& reference,
                             double nu, double rho) {
  const size_t K = input.kappa.size();
  if (input.eta.size() != K || input.y.size() != K)
    throw std::invalid_argument("lyapunov_trace: inconsistent trace lengths");
  LyapunovTrace trace;
  trace.reference = reference;
  for (size_t k = 0; k < K; ++k) {
    if (input.kappa[k].size() != reference.kappa_star.size() ||
        input.eta[k].size() != reference.eta_star.size() ||
        input.y[k].size() != reference.y_star.size())
      throw std::invalid_argument("lyapunov_trace: dimension mismatch with reference");
    const double V = (input.kappa[k] - reference.kappa_star).squaredNorm() / nu +
                     (input.eta[k] - reference.eta_star).squaredNorm() / rho +
                     rho * (input.y[k] - reference.y_star).squaredNorm();
    trace.V.push_back(V);
    if (k < input.x_shared.size()) trace.r.push_back((input.x_shared[k] - input.y[k]).norm());
    if (k < input.costs.size()) trace.p.push_back(input.costs[k]);
  }
  for (size_t k = 0; k + 1 < trace.V.size(); ++k)
    if (trace.V[k + 1] > trace.V[k] + 1e-10)
      trace.monotonicity_violations.push_back(static_cast<int>(k));
  return trace;
}

LyapunovInput stack_daula_trace(const StructuredProblem& problem, const DaulaState& state) {
  const int N = problem.num_subproblems();
  LyapunovInput input;
  const size_t K = state.z_trace.size();
  for (size_t k = 0; k < K; ++k) {
    Vec kappa_stacked(0), eta_stacked(0);
    std::vector<double> y_vals, x_vals;
    double cost = 0.0;
    for (int m = 0; m < N; ++m) {
      const Vec& km = state.kappa_trace[k][m];
      kappa_stacked.conservativeResize(kappa_stacked.size() + km.size());
      kappa_stacked.tail(km.size()) = km;
      const Vec& em = state.eta_trace[k][m];
      eta_stacked.conservativeResize(eta_stacked.size() + em.size());
      eta_stacked.tail(em.size()) = em;
      const auto& list = problem.shared.local_index[m];
      for (int j = 0; j < problem.shared.consensus_dim; ++j)
        if (list[j] >= 0) {
          y_vals.push_back(state.z_tilde_trace[k][j]);
          x_vals.push_back(state.z_trace[k][m][list[j]]);
        }
      cost += problem.subproblems[m].weight *
              problem.subproblems[m].nlp.cost(state.z_trace[k][m], nullptr);
    }
    input.kappa.push_back(std::move(kappa_stacked));
    input.eta.push_back(std::move(eta_stacked));
    input.y.push_back(Eigen::Map<const Vec>(y_vals.data(), y_vals.size()));
    input.x_shared.push_back(Eigen::Map<const Vec>(x_vals.data(), x_vals.size()));
    input.costs.push_back(cost);
  }
  return input;
}

}  // namespace treeopt
