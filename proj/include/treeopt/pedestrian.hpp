#pragma once

#include "treeopt/structured.hpp"

namespace treeopt {

struct InfeasibleSpec : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Adaptive-cruise domain: double-integrator longitudinal dynamics
/// x_{t+1} = x_t + dt v_t, v_{t+1} = v_t + dt u_t, single-shooting over the
/// controls u in R^T.
struct PedestrianParams {
  double dt = 0.25;       // 4 steps per second
  int L = 4;              // 1 s branching horizon
  int T = 20;             // 5 s prediction horizon
  double k_v = 1.0;       // speed-error weight
  double k_u = 5.0;       // acceleration weight
  double d_safety = 2.5;  // meters
  double u_min = -8.0;
  double u_max = 2.0;
  double v_des = 13.0;  // m/s

  void validate() const;
};

struct PedestrianAhead {
  double x = 0.0;        // position along the road, ahead of the ego
  double p_cross = 0.0;  // displayed crossing probability
  int truth = -1;        // simulation only: 1 crosses, 0 does not, -1 unknown
};

struct PedestrianScene {
  double ego_x = 0.0;
  double ego_v = 0.0;
  std::vector<PedestrianAhead> pedestrians;  // strictly increasing x

  void validate() const;
};

/// Distribution over "the m-th pedestrian is the closest crosser"
/// (m = N_p means a free road): p(m) = p_m prod_{i<m}(1-p_i). Computed in
/// telescoping form so the entries sum to one exactly.
Vec crossing_hypothesis_probs(const std::vector<double>& p_cross);

/// One branch of the control tree: stop before pedestrian `stop_index`
/// (-1 = free road), with belief weight `prob`.
struct PedestrianHypothesis {
  int stop_index = -1;
  double prob = 1.0;
};

/// Per-hypothesis QP over the controls. Stop constraints apply over the whole
/// horizon of their branch, control bounds everywhere; the shared block is
/// the first L controls. Throws InfeasibleSpec when a stop line is already
/// violated at t = 0.
StructuredProblem build_pedestrian_problem(const PedestrianScene& scene,
                                           const PedestrianParams& params,
                                           const std::vector<PedestrianHypothesis>& hypotheses);

/// Rolls controls out through the exact discrete dynamics; returns positions
/// x_{1..T} and velocities v_{1..T}.
void rollout(const PedestrianParams& params, double x0, double v0, const Vec& u, Vec& x, Vec& v);

}  // namespace treeopt
