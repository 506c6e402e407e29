#pragma once

#include "treeopt/komo.hpp"
#include "treeopt/pedestrian.hpp"  // InfeasibleSpec

namespace treeopt {

struct CombinatoricsLimit : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Slalom domain: SE(2) configurations (x, y, theta), configuration-space
/// transcription of order k = 2 with no-slip and disc-obstacle constraints.
struct SlalomParams {
  double dt = 0.25;
  int L = 4;
  int T = 20;
  double w_accel = 1.0;       // x, y accelerations
  double w_accel_theta = 1.0;
  double w_centerline = 0.5;
  double w_speed = 0.5;
  double v_des = 8.0;         // m/s
  double radius = 0.5;        // obstacle radius
  double margin = 0.5;        // safety margin
  int order = 2;

  void validate() const;
};

struct SlalomObstacle {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double p_exist = 1.0;  // (0, 1]; 1 = fully observed
  int truth = -1;        // simulation only
};

struct SlalomScene {
  Vec ego_pose = Vec::Zero(3);          // (x, y, theta)
  std::vector<Vec> pose_history;        // k previous poses, oldest first
  std::vector<SlalomObstacle> obstacles;
  double ref_y = 0.0;                   // straight reference line y = ref_y

  void validate() const;
};

/// One combination of obstacle existences.
struct SlalomHypothesis {
  std::vector<int> present;  // indices into the scene obstacle list
  double prob = 1.0;
};

/// All 2^n combinations over the uncertain obstacles (p in (0,1)); fully
/// certain obstacles are always present and excluded from the combinatorics.
/// Throws CombinatoricsLimit when more than `max_uncertain` obstacles are
/// uncertain.
std::vector<SlalomHypothesis> obstacle_hypotheses(const std::vector<SlalomObstacle>& obstacles,
                                                  int max_uncertain = 6);

/// Per-hypothesis k-order subproblem over T SE(2) configurations; shared
/// block = first L configurations. Non-convex. Throws InfeasibleSpec when the
/// start pose lies inside an inflated obstacle of some hypothesis.
StructuredProblem build_slalom_problem(const SlalomScene& scene, const SlalomParams& params,
                                       const std::vector<SlalomHypothesis>& hypotheses);

/// The per-node objective used by the builder, exposed for the joint
/// transcription and tests.
KOrderObjective slalom_objective(const SlalomScene& scene, const SlalomParams& params,
                                 const std::vector<int>& present_obstacles);

}  // namespace treeopt
