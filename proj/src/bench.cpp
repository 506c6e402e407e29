#include "treeopt/bench.hpp"

#include "treeopt/komo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace treeopt {

const char* to_string(Transcription t) {
  return t == Transcription::Shooting ? "shooting" : "tkomo";
}

const char* to_string(BenchSolver s) {
  return s == BenchSolver::DAuLa ? "daula" : "joint_aula";
}

namespace {

DaulaConfig bench_config(Transcription transcription) {
  DaulaConfig cfg;
  cfg.inner.eps_pri = 1e-3;
  cfg.inner.eps_opt = 1e-4;
  cfg.inner.penalty_growth = true;
  cfg.rho = transcription == Transcription::Shooting ? 20.0 : 2.0;
  cfg.xi_pri = 1e-3;
  cfg.xi_dual = 1e-4;
  cfg.max_outer = 200;
  return cfg;
}

StructuredProblem shooting_instance(int branches) {
  PedestrianParams params;
  PedestrianScene scene;
  scene.ego_x = 0.0;
  scene.ego_v = params.v_des;
  std::vector<PedestrianHypothesis> hyps;
  Vec probs;
  {
    std::vector<double> p;
    for (int i = 0; i < branches - 1; ++i) {
      scene.pedestrians.push_back({25.0 + 12.0 * i, 0.3, -1});
      p.push_back(0.3);
    }
    probs = crossing_hypothesis_probs(p);
  }
  for (int m = 0; m < branches - 1; ++m) hyps.push_back({m, probs[m]});
  hyps.push_back({-1, probs[branches - 1]});
  return build_pedestrian_problem(scene, params, hyps);
}

StructuredProblem tkomo_instance(int branches) {
  const int d = 3, k = 2, trunk = 4, tail = 16;
  BeliefState belief = BeliefState::uniform(branches);
  TreeTopology topology = build_qmdp_topology(branches, trunk, tail, belief);

  TrajectoryTree tree;
  tree.topology = topology;
  tree.dim = d;
  tree.order = k;
  tree.configs.assign(topology.node_count, Vec::Zero(d));
  tree.prefix = {Vec::Zero(d), Vec::Zero(d)};

  // per-branch target pull makes the branches genuinely disagree
  KOrderObjective objective;
  objective.order = k;
  objective.dim = d;
  objective.node = [d, k, topology](int node) {
    NodeObjective n;
    n.dim_cost = 2 * d;
    const double target = topology.reach_prob[node] < 1.0 ? 0.5 + 0.1 * (node % 7) : 0.0;
    n.cost_residuals = [d, k, target](const Vec& tuple, Vec& r, SpMat* J) {
      const auto a = tuple.segment((k - 2) * d, d), b = tuple.segment((k - 1) * d, d),
                 c = tuple.segment(k * d, d);
      r.resize(2 * d);
      r.head(d) = c - 2.0 * b + a;
      r.tail(d) = 0.3 * (c - Vec::Constant(d, target));
      if (J) {
        std::vector<Triplet> t;
        for (int i = 0; i < d; ++i) {
          t.emplace_back(i, (k - 2) * d + i, 1.0);
          t.emplace_back(i, (k - 1) * d + i, -2.0);
          t.emplace_back(i, k * d + i, 1.0);
          t.emplace_back(d + i, k * d + i, 0.3);
        }
        J->resize(2 * d, (k + 1) * d);
        J->setFromTriplets(t.begin(), t.end());
      }
    };
    return n;
  };
  return split_to_structured(tree, objective, SplitScheme::Branches).structured;
}

double time_once(const std::function<void()>& body) {
  const auto start = std::chrono::steady_clock::now();
  body();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

}  // namespace

std::vector<BenchCell> scaling_benchmark(const std::vector<int>& branch_counts,
                                         Transcription transcription,
                                         const std::vector<BenchSolver>& solvers, int repeats) {
  if (repeats < 1) throw std::invalid_argument("need at least one repeat");
  for (int n : branch_counts)
    if (n < 2) throw std::invalid_argument("branch counts must be >= 2");

  std::vector<BenchCell> cells;
  for (int branches : branch_counts) {
    StructuredProblem problem = transcription == Transcription::Shooting
                                    ? shooting_instance(branches)
                                    : tkomo_instance(branches);
    DaulaConfig cfg = bench_config(transcription);

    for (BenchSolver solver : solvers) {
      BenchCell cell;
      cell.branches = branches;
      cell.transcription = transcription;
      cell.solver = solver;
      cell.repeats = repeats;

      std::vector<double> times;
      if (solver == BenchSolver::DAuLa) {
        for (int rep = 0; rep < repeats; ++rep) {
          DaulaResult res;
          times.push_back(time_once([&] { res = daula_solve(problem, nullptr, cfg); }));
          cell.outer_iters = res.state.iter;
        }
      } else {
        FlattenedProblem flat = joint_flatten(problem);
        SolverConfig plain = cfg.inner;
        plain.max_outer = cfg.max_outer;
        if (transcription == Transcription::Shooting) {
          plain.hessian = HessianMode::Dense;  // the undecomposed dense baseline
        } else {
          plain.hessian = HessianMode::Sparse;
        }
        for (int rep = 0; rep < repeats; ++rep) {
          SolveResult res;
          times.push_back(
              time_once([&] { res = aula_solve(flat.nlp, Vec::Zero(flat.nlp.dim), plain); }));
          cell.outer_iters = res.outer_iters;
        }
      }
      std::sort(times.begin(), times.end());
      cell.median_ms = times[times.size() / 2];
      cells.push_back(cell);
    }
  }
  return cells;
}

void write_bench_csv(const std::vector<BenchCell>& cells, std::ostream& os) {
  os << "transcription,solver,branches,median_ms,repeats,outer_iters\n";
  for (const BenchCell& c : cells)
    os << to_string(c.transcription) << ',' << to_string(c.solver) << ',' << c.branches << ','
       << c.median_ms << ',' << c.repeats << ',' << c.outer_iters << '\n';
}

double linear_fit_r2(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("need >= 2 points");
  const int n = static_cast<int>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double beta = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double alpha = (sy - beta * sx) / n;
  double ss_res = 0, ss_tot = 0;
  const double mean = sy / n;
  for (int i = 0; i < n; ++i) {
    const double fit = alpha + beta * x[i];
    ss_res += (y[i] - fit) * (y[i] - fit);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  return ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
}

}  // namespace treeopt
