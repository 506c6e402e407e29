#include "treeopt/daula.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

namespace treeopt {

void DaulaConfig::validate() const {
  inner.validate();
  if (rho <= 0) throw std::invalid_argument("rho must be positive");
  if (xi_pri <= 0 || xi_dual <= 0) throw std::invalid_argument("xi thresholds must be positive");
  if (max_outer < 1) throw std::invalid_argument("max_outer must be >= 1");
}

namespace {

std::vector<ConsensusTerm> make_consensus_terms(const SharedVariableMap& shared, int m,
                                                const Vec& z_tilde, const Vec& eta) {
  std::vector<ConsensusTerm> terms;
  const auto& list = shared.local_index[m];
  for (int j = 0; j < shared.consensus_dim; ++j)
    if (list[j] >= 0) terms.push_back({list[j], z_tilde[j], eta[j]});
  return terms;
}

void consensus_average(const StructuredProblem& problem, const std::vector<Vec>& z, Vec& z_tilde) {
  const SharedVariableMap& shared = problem.shared;
  Vec sum = Vec::Zero(shared.consensus_dim);
  Vec count = Vec::Zero(shared.consensus_dim);
  for (int m = 0; m < problem.num_subproblems(); ++m) {
    const auto& list = shared.local_index[m];
    for (int j = 0; j < shared.consensus_dim; ++j)
      if (list[j] >= 0) {
        sum[j] += z[m][list[j]];
        count[j] += 1.0;
      }
  }
  z_tilde = sum.cwiseQuotient(count);
}

std::vector<std::vector<bool>> active_sets(const StructuredProblem& problem,
                                           const std::vector<Vec>& z,
                                           const std::vector<Vec>& lambda) {
  std::vector<std::vector<bool>> sets(problem.num_subproblems());
  for (int m = 0; m < problem.num_subproblems(); ++m) {
    const NlpProblem& nlp = problem.subproblems[m].nlp;
    if (nlp.dim_ineq == 0) continue;
    Vec g(nlp.dim_ineq);
    nlp.ineq(z[m], g, nullptr);
    sets[m].resize(nlp.dim_ineq);
    for (int i = 0; i < nlp.dim_ineq; ++i) sets[m][i] = g[i] > 0.0 || lambda[m][i] > 0.0;
  }
  return sets;
}

void parallel_for(int n, bool parallel, const std::function<void(int)>& body) {
  if (!parallel || n <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  const int workers = std::min<int>(n, std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += workers) body(i);
    });
  for (std::thread& t : pool) t.join();
}

}  // namespace

DaulaResult daula_solve(const StructuredProblem& problem, const std::vector<Vec>* init,
                        const DaulaConfig& config) {
  problem.validate(false);
  config.validate();
  const int N = problem.num_subproblems();

  DaulaResult result;
  DaulaState& state = result.state;
  state.z.resize(N);
  state.lambda.resize(N);
  state.kappa.resize(N);
  state.eta.resize(N);
  result.subproblem_reports.resize(N);

  std::vector<AulaObjective> objectives;
  objectives.reserve(N);
  for (int m = 0; m < N; ++m) {
    const Subproblem& sub = problem.subproblems[m];
    state.z[m] = init ? (*init)[m] : Vec::Zero(sub.nlp.dim);
    if (state.z[m].size() != sub.nlp.dim)
      throw std::invalid_argument("warm start dimension mismatch");
    state.lambda[m] = Vec::Zero(sub.nlp.dim_ineq);
    state.kappa[m] = Vec::Zero(sub.nlp.dim_eq);
    state.eta[m] = Vec::Zero(problem.shared.consensus_dim);
    objectives.emplace_back(sub.nlp, sub.weight);
  }
  consensus_average(problem, state.z, state.z_tilde);

  const bool single = N == 1;  // reduces to the plain Augmented Lagrangian
  double mu = config.inner.mu, nu = config.inner.nu;

  std::vector<std::vector<bool>> prev_active;
  std::vector<AulaStep> steps(N);

  for (int iter = 1; iter <= config.max_outer; ++iter) {
    state.iter = iter;
    const Vec z_tilde_prev = state.z_tilde;

    // Distributed phase: each subproblem reads a snapshot of (z_tilde, eta)
    // and writes its own slot.
    parallel_for(N, config.parallel, [&](int m) {
      const Subproblem& sub = problem.subproblems[m];
      if (!single)
        objectives[m].set_consensus(
            make_consensus_terms(problem.shared, m, z_tilde_prev, state.eta[m]), config.rho);
      steps[m] = aula_step(objectives[m], sub.nlp, mu, nu, state.z[m], state.lambda[m],
                           state.kappa[m], config.inner);
    });

    double viol_g = 0.0, viol_h = 0.0, step_norm = 0.0;
    SolveStatus worst = SolveStatus::Converged;
    for (int m = 0; m < N; ++m) {
      viol_g = std::max(viol_g, steps[m].viol_g);
      viol_h = std::max(viol_h, steps[m].viol_h);
      step_norm = std::max(step_norm, steps[m].step_norm);
      result.subproblem_reports[m] = {steps[m].inner.status, steps[m].inner.iters,
                                      steps[m].inner.cost};
      if (steps[m].inner.status == SolveStatus::NumericalFailure)
        worst = SolveStatus::NumericalFailure;
      if (steps[m].inner.status == SolveStatus::MaxIterations) ++result.inner_early_stops;
    }
    if (worst == SolveStatus::NumericalFailure) {
      result.status = SolveStatus::NumericalFailure;
      return result;
    }

    // Centralized phase: consensus averaging, then the consensus-dual update.
    consensus_average(problem, state.z, state.z_tilde);
    double consensus_pri = 0.0;
    for (int m = 0; m < N; ++m) {
      const auto& list = problem.shared.local_index[m];
      double sq = 0.0;
      for (int j = 0; j < problem.shared.consensus_dim; ++j)
        if (list[j] >= 0) {
          const double delta = state.z[m][list[j]] - state.z_tilde[j];
          sq += delta * delta;
          state.eta[m][j] += config.rho * delta;
        }
      consensus_pri = std::max(consensus_pri, std::sqrt(sq));
    }
    const double consensus_dual = (state.z_tilde - z_tilde_prev).norm();

    state.residuals.push_back({iter, viol_g, viol_h, step_norm, consensus_pri, consensus_dual});
    if (config.record_iterates) {
      state.z_trace.push_back(state.z);
      state.z_tilde_trace.push_back(state.z_tilde);
      state.kappa_trace.push_back(state.kappa);
      state.eta_trace.push_back(state.eta);
    }

    std::vector<std::vector<bool>> active = active_sets(problem, state.z, state.lambda);
    result.active_set_stable = iter > 1 && active == prev_active;
    prev_active = std::move(active);

    const bool converged = viol_g <= config.inner.eps_pri && viol_h <= config.inner.eps_pri &&
                           step_norm <= config.inner.eps_opt &&
                           (single || (consensus_pri <= config.xi_pri &&
                                       consensus_dual <= config.xi_dual));
    if (converged && !config.run_to_max) {
      result.status = SolveStatus::Converged;
      return result;
    }

    if (config.inner.penalty_growth) {
      mu = std::min(mu * config.inner.growth_factor, config.inner.penalty_max);
      nu = std::min(nu * config.inner.growth_factor, config.inner.penalty_max);
    }
  }
  result.status = SolveStatus::MaxIterations;
  return result;
}

void write_residuals_csv(const std::vector<DaulaResiduals>& residuals, std::ostream& os) {
  os << "iter,viol_g_max,viol_h_max,step_norm_max,consensus_pri,consensus_dual\n";
  for (const DaulaResiduals& r : residuals)
    os << r.iter << ',' << r.viol_g_max << ',' << r.viol_h_max << ',' << r.step_norm_max << ','
       << r.consensus_pri << ',' << r.consensus_dual << '\n';
}

}  // namespace treeopt
