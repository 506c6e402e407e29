#include "treeopt/slalom.hpp"

#include <cmath>

namespace treeopt {

namespace {
constexpr double kNormGuard = 1e-12;
}

void SlalomParams::validate() const {
  if (dt <= 0) throw std::invalid_argument("dt must be positive");
  if (L < 1 || T <= L) throw std::invalid_argument("need 0 < L < T");
  if (order != 2) throw std::invalid_argument("slalom transcription uses motion order 2");
  if (radius < 0 || margin < 0) throw std::invalid_argument("geometry must be nonnegative");
}

void SlalomScene::validate() const {
  if (ego_pose.size() != 3) throw std::invalid_argument("ego pose must be (x, y, theta)");
  for (const Vec& p : pose_history)
    if (p.size() != 3) throw std::invalid_argument("pose history entries must be (x, y, theta)");
  for (const SlalomObstacle& o : obstacles)
    if (o.p_exist <= 0.0 || o.p_exist > 1.0)
      throw std::invalid_argument("existence probabilities must be in (0,1]");
}

std::vector<SlalomHypothesis> obstacle_hypotheses(const std::vector<SlalomObstacle>& obstacles,
                                                  int max_uncertain) {
  std::vector<int> certain, uncertain;
  for (size_t i = 0; i < obstacles.size(); ++i) {
    if (obstacles[i].p_exist >= 1.0)
      certain.push_back(static_cast<int>(i));
    else
      uncertain.push_back(static_cast<int>(i));
  }
  if (static_cast<int>(uncertain.size()) > max_uncertain)
    throw CombinatoricsLimit("too many uncertain obstacles for exhaustive branching");

  std::vector<SlalomHypothesis> hypotheses;
  const unsigned combos = 1u << uncertain.size();
  for (unsigned mask = 0; mask < combos; ++mask) {
    SlalomHypothesis hyp;
    hyp.present = certain;
    hyp.prob = 1.0;
    for (size_t i = 0; i < uncertain.size(); ++i) {
      const double p = obstacles[uncertain[i]].p_exist;
      if (mask & (1u << i)) {
        hyp.present.push_back(uncertain[i]);
        hyp.prob *= p;
      } else {
        hyp.prob *= 1.0 - p;
      }
    }
    std::sort(hyp.present.begin(), hyp.present.end());
    hypotheses.push_back(std::move(hyp));
  }
  return hypotheses;
}

KOrderObjective slalom_objective(const SlalomScene& scene, const SlalomParams& params,
                                 const std::vector<int>& present_obstacles) {
  std::vector<Eigen::Vector2d> centers;
  for (int idx : present_obstacles) centers.push_back(scene.obstacles[idx].center);

  KOrderObjective obj;
  obj.order = params.order;
  obj.dim = 3;
  obj.node = [params, centers, ref_y = scene.ref_y](int) {
    NodeObjective node;
    // accelerations as plain second differences; keeps the curvature on the
    // same scale as the other terms and the consensus penalty
    const double sa = std::sqrt(params.w_accel);
    const double sth = std::sqrt(params.w_accel_theta);
    const double scl = std::sqrt(params.w_centerline);
    const double ssp = std::sqrt(params.w_speed);

    node.dim_cost = 5;
    node.cost_residuals = [params, sa, sth, scl, ssp, ref_y](const Vec& tuple, Vec& r, SpMat* J) {
      const auto q0 = tuple.segment(0, 3), q1 = tuple.segment(3, 3), q2 = tuple.segment(6, 3);
      const double dx = q2[0] - q1[0], dy = q2[1] - q1[1];
      const double dist = std::sqrt(dx * dx + dy * dy + kNormGuard);
      r.resize(5);
      r[0] = sa * (q2[0] - 2.0 * q1[0] + q0[0]);
      r[1] = sa * (q2[1] - 2.0 * q1[1] + q0[1]);
      r[2] = sth * (q2[2] - 2.0 * q1[2] + q0[2]);
      r[3] = scl * (q2[1] - ref_y);
      r[4] = ssp * (dist / params.dt - params.v_des);
      if (J) {
        std::vector<Triplet> t;
        for (int i = 0; i < 2; ++i) {
          t.emplace_back(i, 0 + i, sa);
          t.emplace_back(i, 3 + i, -2.0 * sa);
          t.emplace_back(i, 6 + i, sa);
        }
        t.emplace_back(2, 2, sth);
        t.emplace_back(2, 5, -2.0 * sth);
        t.emplace_back(2, 8, sth);
        t.emplace_back(3, 7, scl);
        const double c = ssp / (params.dt * dist);
        t.emplace_back(4, 6, c * dx);
        t.emplace_back(4, 7, c * dy);
        t.emplace_back(4, 3, -c * dx);
        t.emplace_back(4, 4, -c * dy);
        J->resize(5, 9);
        J->setFromTriplets(t.begin(), t.end());
      }
    };

    node.dim_eq = 1;
    node.eq = [](const Vec& tuple, Vec& h, SpMat* J) {
      const auto q1 = tuple.segment(3, 3), q2 = tuple.segment(6, 3);
      const double dx = q2[0] - q1[0], dy = q2[1] - q1[1];
      const double s = std::sin(q1[2]), c = std::cos(q1[2]);
      h.resize(1);
      h[0] = dx * s - dy * c;  // zero lateral displacement in the body frame
      if (J) {
        std::vector<Triplet> t;
        t.emplace_back(0, 6, s);
        t.emplace_back(0, 3, -s);
        t.emplace_back(0, 7, -c);
        t.emplace_back(0, 4, c);
        t.emplace_back(0, 5, dx * c + dy * s);
        J->resize(1, 9);
        J->setFromTriplets(t.begin(), t.end());
      }
    };

    if (!centers.empty()) {
      // clearance at the node and at the segment midpoint, so the path
      // cannot cut through a disc between two configurations
      const double clearance = params.radius + params.margin;
      node.dim_ineq = 2 * static_cast<int>(centers.size());
      node.ineq = [centers, clearance](const Vec& tuple, Vec& g, SpMat* J) {
        const auto q1 = tuple.segment(3, 3), q2 = tuple.segment(6, 3);
        const double mx = 0.5 * (q1[0] + q2[0]), my = 0.5 * (q1[1] + q2[1]);
        g.resize(2 * centers.size());
        std::vector<Triplet> t;
        for (size_t i = 0; i < centers.size(); ++i) {
          const int row = 2 * static_cast<int>(i);
          const double dx = q2[0] - centers[i][0], dy = q2[1] - centers[i][1];
          const double dist = std::sqrt(dx * dx + dy * dy + kNormGuard);
          g[row] = clearance - dist;
          const double mdx = mx - centers[i][0], mdy = my - centers[i][1];
          const double mdist = std::sqrt(mdx * mdx + mdy * mdy + kNormGuard);
          g[row + 1] = clearance - mdist;
          if (J) {
            t.emplace_back(row, 6, -dx / dist);
            t.emplace_back(row, 7, -dy / dist);
            t.emplace_back(row + 1, 3, -0.5 * mdx / mdist);
            t.emplace_back(row + 1, 4, -0.5 * mdy / mdist);
            t.emplace_back(row + 1, 6, -0.5 * mdx / mdist);
            t.emplace_back(row + 1, 7, -0.5 * mdy / mdist);
          }
        }
        if (J) {
          J->resize(static_cast<int>(2 * centers.size()), 9);
          J->setFromTriplets(t.begin(), t.end());
        }
      };
    }
    return node;
  };
  return obj;
}

StructuredProblem build_slalom_problem(const SlalomScene& scene, const SlalomParams& params,
                                       const std::vector<SlalomHypothesis>& hypotheses) {
  params.validate();
  scene.validate();
  if (hypotheses.empty()) throw std::invalid_argument("need at least one hypothesis");
  if (static_cast<int>(scene.pose_history.size()) < params.order - 1)
    throw std::invalid_argument("pose history too short for the motion order");

  const double clearance = params.radius + params.margin;
  for (const SlalomHypothesis& hyp : hypotheses)
    for (int idx : hyp.present) {
      const auto& c = scene.obstacles[idx].center;
      const double dx = scene.ego_pose[0] - c[0], dy = scene.ego_pose[1] - c[1];
      if (std::sqrt(dx * dx + dy * dy) < clearance)
        throw InfeasibleSpec("start pose inside an inflated obstacle");
    }

  TrajectoryTree chain;
  chain.topology = TreeTopology::chain(params.T);
  chain.dim = 3;
  chain.order = params.order;
  chain.configs.assign(params.T, scene.ego_pose);
  for (int i = params.order - 1; i >= 1; --i)
    chain.prefix.push_back(scene.pose_history[scene.pose_history.size() - i]);
  chain.prefix.push_back(scene.ego_pose);

  StructuredProblem out;
  out.shared =
      SharedVariableMap::leading_block(static_cast<int>(hypotheses.size()), params.L * 3);
  for (const SlalomHypothesis& hyp : hypotheses)
    out.subproblems.push_back(
        {tkomo_transcribe(chain, slalom_objective(scene, params, hyp.present)), hyp.prob});
  return out;
}

}  // namespace treeopt
