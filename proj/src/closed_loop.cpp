#include "treeopt/closed_loop.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

namespace treeopt {

namespace {

enum class EntityState { Unresolved, Active, Cleared };

struct LiveEntity {
  ScenarioEntity spec;
  EntityState state = EntityState::Unresolved;
  double active_until = 0.0;  // pedestrian: end of the crossing window

  // displayed probability before the reveal collapse
  double displayed(double distance, double prior, double ramp_width) const {
    const double s = 1.0 / (1.0 + std::exp(-(spec.reveal_distance - distance) / ramp_width));
    const double p = prior + ((spec.truth ? 1.0 : 0.0) - prior) * s;
    return std::min(0.99, std::max(0.01, p));
  }
};

double elapsed_ms(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

// ---------------------------------------------------------------------------
// pedestrian domain

struct PedestrianController {
  const ScenarioConfig& config;
  // previous plans per stop index, used as warm starts
  std::map<int, Vec> previous_plans;
  Vec fallback;  // worst-case control sequence from the last converged solve
  int fallback_at = 0;

  explicit PedestrianController(const ScenarioConfig& cfg) : config(cfg) {}

  std::vector<PedestrianHypothesis> hypotheses(const std::vector<const LiveEntity*>& visible,
                                               const PedestrianScene& scene) const {
    std::vector<PedestrianHypothesis> hyps;
    switch (config.controller) {
      case ControllerKind::FullObservability: {
        int stop = -1;
        for (size_t i = 0; i < visible.size(); ++i)
          if (visible[i]->spec.truth) {
            stop = static_cast<int>(i);
            break;
          }
        hyps.push_back({stop, 1.0});
        break;
      }
      case ControllerKind::SingleHypothesis: {
        hyps.push_back({scene.pedestrians.empty() ? -1 : 0, 1.0});
        break;
      }
      case ControllerKind::TreeK: {
        std::vector<double> p;
        for (const auto& ped : scene.pedestrians) p.push_back(ped.p_cross);
        Vec probs = crossing_hypothesis_probs(p);
        const int n = static_cast<int>(p.size());
        const int keep = std::min(n, config.tree_branches - 1);
        for (int m = 0; m < keep; ++m) hyps.push_back({m, probs[m]});
        // merge the remaining crossing hypotheses into the most conservative
        // kept branch (stop before the nearest pedestrian)
        double merged = 0.0;
        for (int m = keep; m < n; ++m) merged += probs[m];
        if (!hyps.empty()) hyps.front().prob += merged;
        hyps.push_back({-1, probs[n]});
        break;
      }
    }
    return hyps;
  }
};

RunResult run_pedestrian(const ScenarioConfig& config) {
  const PedestrianParams& params = config.pedestrian;
  Scenario scenario = generate_scenario(config);
  std::vector<LiveEntity> entities;
  for (const ScenarioEntity& e : scenario.entities) entities.push_back({e});

  PedestrianController controller(config);
  RunResult result;
  RunMetrics& metrics = result.metrics;

  double ego_x = 0.0, ego_v = params.v_des;
  const double dt_sim = 1.0 / config.replan_hz;
  const int ticks = static_cast<int>(config.duration * config.replan_hz);
  double cost_sum = 0.0, speed_sum = 0.0, time_sum = 0.0;
  std::vector<bool> violated(entities.size(), false);

  for (int tick = 0; tick < ticks; ++tick) {
    const double now = tick * dt_sim;

    // sense: update entity states and displayed probabilities
    PedestrianScene scene;
    scene.ego_x = ego_x;
    scene.ego_v = ego_v;
    std::vector<const LiveEntity*> visible;
    for (LiveEntity& e : entities) {
      if (e.state == EntityState::Active && now >= e.active_until) e.state = EntityState::Cleared;
      if (e.state == EntityState::Cleared) continue;
      const double distance = e.spec.x - ego_x;
      if (distance <= 0.0 || distance > config.horizon_range) continue;
      if (e.state == EntityState::Unresolved && distance <= e.spec.reveal_distance) {
        if (e.spec.truth) {
          e.state = EntityState::Active;
          e.active_until = now + config.crossing_duration;
        } else {
          e.state = EntityState::Cleared;
          continue;
        }
      }
      // drop pedestrians the ego can no longer brake for (already past the
      // stop line); any harm is captured by the violation counter
      if (ego_x > e.spec.x - params.d_safety) continue;
      PedestrianAhead ped;
      ped.x = e.spec.x;
      ped.truth = e.spec.truth ? 1 : 0;
      if (config.controller == ControllerKind::FullObservability)
        ped.p_cross = e.state == EntityState::Active || e.spec.truth ? 1.0 : 0.0;
      else if (e.state == EntityState::Active)
        ped.p_cross = 1.0;
      else
        ped.p_cross = e.displayed(distance, config.fraction, config.ramp_width);
      scene.pedestrians.push_back(ped);
      visible.push_back(&e);
    }

    // plan
    std::vector<PedestrianHypothesis> hyps = controller.hypotheses(visible, scene);
    double u0 = 0.0;
    const auto start = std::chrono::steady_clock::now();
    StructuredProblem problem = build_pedestrian_problem(scene, params, hyps);
    std::vector<Vec> init;
    for (const PedestrianHypothesis& h : hyps) {
      auto it = controller.previous_plans.find(h.stop_index);
      if (it == controller.previous_plans.end()) it = controller.previous_plans.find(-1);
      init.push_back(it != controller.previous_plans.end() ? it->second : Vec::Zero(params.T));
    }
    DaulaResult solve = daula_solve(problem, &init, config.solver);
    const double ms = elapsed_ms(start);
    time_sum += ms;
    metrics.max_outer_iterations = std::max(metrics.max_outer_iterations, solve.state.iter);

    if (solve.status == SolveStatus::Converged) {
      u0 = solve.state.z_tilde.size() > 0 ? solve.state.z_tilde[0] : solve.state.z[0][0];
      controller.previous_plans.clear();
      for (size_t m = 0; m < hyps.size(); ++m)
        controller.previous_plans[hyps[m].stop_index] = solve.state.z[m];
      controller.fallback = solve.state.z[0];
      controller.fallback_at = 1;
    } else {
      ++metrics.solver_failures;
      if (controller.fallback.size() > 0 &&
          controller.fallback_at < static_cast<int>(controller.fallback.size()))
        u0 = controller.fallback[controller.fallback_at++];
      else
        u0 = params.u_min;  // no usable plan: brake
    }
    u0 = std::min(params.u_max, std::max(params.u_min, u0));

    if (config.keep_records) {
      PlanRecord record;
      record.timestamp = now;
      record.belief.resize(hyps.size());
      for (size_t m = 0; m < hyps.size(); ++m) record.belief[m] = hyps[m].prob;
      record.status = solve.status;
      record.outer_iters = solve.state.iter;
      record.executed = Vec::Constant(1, u0);
      result.records.push_back(std::move(record));
    }

    // execute one period of the trunk through the exact discrete dynamics
    ego_x += dt_sim * ego_v + 0.5 * dt_sim * dt_sim * u0;
    ego_v += dt_sim * u0;

    cost_sum += params.k_v * (ego_v - params.v_des) * (ego_v - params.v_des) +
                params.k_u * u0 * u0;
    speed_sum += ego_v;
    ++metrics.cycles;

    // safety against ground-truth crossers while they occupy the road
    for (size_t i = 0; i < entities.size(); ++i) {
      const LiveEntity& e = entities[i];
      if (e.state != EntityState::Active || violated[i]) continue;
      if (ego_x > e.spec.x - params.d_safety + 1e-6) {
        violated[i] = true;
        ++metrics.constraint_violations;
      }
    }
  }

  metrics.avg_executed_cost = cost_sum / std::max(1, metrics.cycles);
  metrics.avg_speed = speed_sum / std::max(1, metrics.cycles);
  metrics.avg_plan_time_ms = time_sum / std::max(1, metrics.cycles);
  return result;
}

// ---------------------------------------------------------------------------
// slalom domain

struct UnicycleState {
  Vec pose = Vec::Zero(3);
  double v = 0.0;
  double omega = 0.0;
};

void integrate_unicycle(UnicycleState& s, double dt) {
  if (std::abs(s.omega) < 1e-9) {
    s.pose[0] += s.v * dt * std::cos(s.pose[2]);
    s.pose[1] += s.v * dt * std::sin(s.pose[2]);
  } else {
    const double theta0 = s.pose[2];
    const double theta1 = theta0 + s.omega * dt;
    s.pose[0] += s.v / s.omega * (std::sin(theta1) - std::sin(theta0));
    s.pose[1] += s.v / s.omega * (-std::cos(theta1) + std::cos(theta0));
    s.pose[2] = theta1;
  }
}

RunResult run_slalom(const ScenarioConfig& config) {
  const SlalomParams& params = config.slalom;
  Scenario scenario = generate_scenario(config);
  std::vector<LiveEntity> entities;
  for (const ScenarioEntity& e : scenario.entities) entities.push_back({e});

  RunResult result;
  RunMetrics& metrics = result.metrics;

  UnicycleState ego;
  ego.v = params.v_des;
  const double dt_sim = 1.0 / config.replan_hz;
  const int ticks = static_cast<int>(config.duration * config.replan_hz);
  double cost_sum = 0.0, speed_sum = 0.0, time_sum = 0.0;
  double prev_v = ego.v, prev_omega = 0.0;
  std::vector<bool> hit(entities.size(), false);
  std::vector<Vec> previous;  // per-branch plan from the last converged solve
  std::vector<std::vector<double>> previous_keys;  // present-obstacle x positions
  Vec fallback;
  int fallback_at = 0;
  DaulaResiduals last_residuals;
  std::vector<DaulaResiduals> last_history;
  Vec last_belief;
  Vec last_scene;

  auto straight_init = [&](const Vec& pose) {
    Vec one(params.T * 3);
    for (int t = 0; t < params.T; ++t) {
      one[3 * t + 0] = pose[0] + (t + 1) * params.dt * params.v_des * std::cos(pose[2]);
      one[3 * t + 1] = pose[1] + (t + 1) * params.dt * params.v_des * std::sin(pose[2]);
      one[3 * t + 2] = pose[2];
    }
    return one;
  };

  for (int tick = 0; tick < ticks; ++tick) {
    const double now = tick * dt_sim;

    // sense
    SlalomScene scene;
    scene.ego_pose = ego.pose;
    UnicycleState back = ego;
    back.v = -back.v;
    back.omega = -back.omega;
    integrate_unicycle(back, params.dt);
    scene.pose_history = {back.pose};

    std::vector<int> true_indices;  // active true obstacles, scene indexing
    for (LiveEntity& e : entities) {
      if (e.state == EntityState::Cleared) continue;
      const double dx = e.spec.x - ego.pose[0], dy = e.spec.lateral - ego.pose[1];
      const double distance = std::sqrt(dx * dx + dy * dy);
      if (e.spec.x < ego.pose[0] - 5.0) {  // passed
        if (!e.spec.truth || e.state != EntityState::Unresolved) e.state = EntityState::Cleared;
        continue;
      }
      if (e.spec.x - ego.pose[0] > config.horizon_range) continue;
      if (e.state == EntityState::Unresolved && distance <= e.spec.reveal_distance)
        e.state = e.spec.truth ? EntityState::Active : EntityState::Cleared;
      if (e.state == EntityState::Cleared) continue;

      SlalomObstacle obstacle;
      obstacle.center << e.spec.x, e.spec.lateral;
      obstacle.truth = e.spec.truth ? 1 : 0;
      if (config.controller == ControllerKind::FullObservability) {
        if (!e.spec.truth) continue;
        obstacle.p_exist = 1.0;
      } else if (e.state == EntityState::Active ||
                 config.controller == ControllerKind::SingleHypothesis) {
        obstacle.p_exist = 1.0;
      } else {
        obstacle.p_exist = e.displayed(distance, 1.0 - config.fraction, config.ramp_width);
      }
      scene.obstacles.push_back(obstacle);
      if (e.spec.truth) true_indices.push_back(static_cast<int>(&e - entities.data()));
    }

    // plan
    const auto start = std::chrono::steady_clock::now();
    const int max_uncertain = std::max(0, static_cast<int>(std::log2(config.tree_branches)));
    // branch over the nearest uncertain obstacles; the rest are treated as
    // present, which keeps the tree within its branch budget conservatively
    int uncertain_seen = 0;
    for (SlalomObstacle& o : scene.obstacles)
      if (o.p_exist < 1.0 && ++uncertain_seen > max_uncertain) o.p_exist = 1.0;

    // obstacles already alongside the car cannot be re-planned around (the
    // first constrained midpoint is pinned to the fixed pose history), and a
    // start pose inside an inflated disc would make the subproblem
    // infeasible outright; both are dropped from the constraint set while
    // the clearance metrics keep tracking them
    {
      const double clearance = params.radius + params.margin;
      std::vector<SlalomObstacle> kept;
      const double step_len = params.v_des * params.dt;
      for (const SlalomObstacle& o : scene.obstacles) {
        const double lead = o.center[0] - ego.pose[0];
        const double lateral = std::abs(o.center[1] - ego.pose[1]);
        if (lead < 0.5) continue;
        if (lead < 1.1 * step_len && lateral > params.radius + 0.25) continue;
        const double dx = ego.pose[0] - o.center[0], dy = ego.pose[1] - o.center[1];
        if (std::sqrt(dx * dx + dy * dy) >= clearance + 1e-9) kept.push_back(o);
      }
      scene.obstacles = std::move(kept);
    }

    Vec pose_cmd = ego.pose;
    SolveStatus status = SolveStatus::Converged;
    int outer = 0;
    Vec branch0;
    try {
      std::vector<SlalomHypothesis> hyps = obstacle_hypotheses(scene.obstacles);
      StructuredProblem problem = build_slalom_problem(scene, params, hyps);
      std::vector<Vec> init;
      for (const SlalomHypothesis& h : hyps) {
        // warm start from the branch that handled the same obstacle set, or
        // failing that the smallest superset: a plan that swerved for more
        // obstacles is a safe seed, a straight line through a confirmed
        // obstacle is not
        std::vector<double> key;
        for (int idx : h.present) key.push_back(scene.obstacles[idx].center[0]);
        int match = -1;
        size_t match_size = std::numeric_limits<size_t>::max();
        for (size_t m = 0; m < previous_keys.size(); ++m) {
          bool superset = true;
          for (double x : key)
            superset = superset &&
                       std::count(previous_keys[m].begin(), previous_keys[m].end(), x) > 0;
          if (superset && previous_keys[m].size() < match_size) {
            match = static_cast<int>(m);
            match_size = previous_keys[m].size();
          }
        }
        init.push_back(match >= 0 ? previous[match] : straight_init(ego.pose));
      }
      DaulaResult solve = daula_solve(problem, &init, config.solver);
      status = solve.status;
      outer = solve.state.iter;
      if (config.keep_records && !solve.state.residuals.empty()) {
        last_residuals = solve.state.residuals.back();
        last_history = status == SolveStatus::Converged ? std::vector<DaulaResiduals>{}
                                                        : solve.state.residuals;
        last_belief.resize(hyps.size());
        for (size_t m = 0; m < hyps.size(); ++m) last_belief[m] = hyps[m].prob;
        last_scene.resize(4 + 3 * scene.obstacles.size());
        last_scene.head(3) = ego.pose;
        last_scene[3] = ego.v;
        for (size_t i = 0; i < scene.obstacles.size(); ++i)
          last_scene.segment(4 + 3 * i, 3) << scene.obstacles[i].center[0],
              scene.obstacles[i].center[1], scene.obstacles[i].p_exist;
      }
      metrics.max_outer_iterations = std::max(metrics.max_outer_iterations, outer);
      if (status == SolveStatus::Converged) {
        branch0 = solve.state.z[0];
        branch0.head(params.L * 3) = solve.state.z_tilde;
        previous = solve.state.z;
        previous_keys.clear();
        for (const SlalomHypothesis& h : hyps) {
          std::vector<double> key;
          for (int idx : h.present) key.push_back(scene.obstacles[idx].center[0]);
          previous_keys.push_back(std::move(key));
        }
        fallback = branch0;
        fallback_at = 0;
      }
    } catch (const InfeasibleSpec&) {
      status = SolveStatus::NumericalFailure;
    }
    time_sum += elapsed_ms(start);

    if (status == SolveStatus::Converged) {
      pose_cmd = branch0.segment(0, 3);
    } else {
      ++metrics.solver_failures;
      if (fallback.size() > 0 && 3 * (fallback_at + 1) <= fallback.size()) {
        pose_cmd = fallback.segment(3 * fallback_at, 3);
        ++fallback_at;
      } else {
        pose_cmd = ego.pose;  // stop in place
      }
    }

    // execute: follow the first planned transition with exact unicycle motion
    const double dx = pose_cmd[0] - ego.pose[0], dy = pose_cmd[1] - ego.pose[1];
    ego.v = std::sqrt(dx * dx + dy * dy) / params.dt;
    ego.omega = (pose_cmd[2] - ego.pose[2]) / params.dt;
    integrate_unicycle(ego, dt_sim);

    if (config.keep_records) {
      PlanRecord record;
      record.timestamp = now;
      record.status = status;
      record.outer_iters = outer;
      record.executed = ego.pose;
      record.final_residuals = last_residuals;
      record.residual_history = last_history;
      record.belief = last_belief;
      record.scene_dump = last_scene;
      result.records.push_back(record);
    }

    // executed cost mirrors the planner's terms at the plan discretization
    const double a_lin = (ego.v - prev_v) * params.dt;  // second-difference units
    const double a_th = (ego.omega - prev_omega) * params.dt;
    prev_v = ego.v;
    prev_omega = ego.omega;
    const double c_acc = params.w_accel * a_lin * a_lin + params.w_accel_theta * a_th * a_th;
    const double c_cl =
        params.w_centerline * (ego.pose[1] - scene.ref_y) * (ego.pose[1] - scene.ref_y);
    const double c_sp = params.w_speed * (ego.v - params.v_des) * (ego.v - params.v_des);
    metrics.cost_accel += c_acc;
    metrics.cost_centerline += c_cl;
    metrics.cost_speed += c_sp;
    cost_sum += c_acc + c_cl + c_sp;
    speed_sum += ego.v;
    ++metrics.cycles;

    // clearance against active true obstacles
    for (size_t i = 0; i < entities.size(); ++i) {
      const LiveEntity& e = entities[i];
      if (!e.spec.truth || e.state == EntityState::Cleared) continue;
      if (e.spec.x < ego.pose[0] - 5.0 || e.spec.x > ego.pose[0] + config.horizon_range) continue;
      const double dxo = ego.pose[0] - e.spec.x, dyo = ego.pose[1] - e.spec.lateral;
      const double dist = std::sqrt(dxo * dxo + dyo * dyo);
      metrics.min_true_clearance = std::min(metrics.min_true_clearance, dist);
      if (dist < params.radius && !hit[i]) {
        hit[i] = true;
        ++metrics.constraint_violations;
      }
    }
  }

  metrics.avg_executed_cost = cost_sum / std::max(1, metrics.cycles);
  metrics.avg_speed = speed_sum / std::max(1, metrics.cycles);
  metrics.avg_plan_time_ms = time_sum / std::max(1, metrics.cycles);
  return result;
}

}  // namespace

RunResult run_closed_loop(const ScenarioConfig& config) {
  config.validate();
  return config.domain == Domain::Pedestrian ? run_pedestrian(config) : run_slalom(config);
}

SummaryRow summary_row(const ScenarioConfig& config, const RunMetrics& metrics) {
  SummaryRow row;
  row.domain = to_string(config.domain);
  row.controller = to_string(config.controller);
  row.density = config.density;
  row.fraction = config.fraction;
  row.seed = config.seed;
  row.avg_cost = metrics.avg_executed_cost;
  row.avg_speed = metrics.avg_speed;
  row.plan_ms = metrics.avg_plan_time_ms;
  row.violations = metrics.constraint_violations;
  row.failures = metrics.solver_failures;
  return row;
}

void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& os) {
  os << "domain,controller,density,fraction,seed,avg_cost,avg_speed,plan_ms,violations,failures\n";
  for (const SummaryRow& r : rows)
    os << r.domain << ',' << r.controller << ',' << r.density << ',' << r.fraction << ','
       << r.seed << ',' << r.avg_cost << ',' << r.avg_speed << ',' << r.plan_ms << ','
       << r.violations << ',' << r.failures << '\n';
}

std::string summarize(const std::vector<SummaryRow>& rows) {
  struct Cell {
    double cost = 0.0, speed = 0.0, ms = 0.0;
    int violations = 0, failures = 0, n = 0;
  };
  std::map<std::tuple<std::string, std::string, double, double>, Cell> cells;
  for (const SummaryRow& r : rows) {
    Cell& c = cells[{r.domain, r.controller, r.density, r.fraction}];
    c.cost += r.avg_cost;
    c.speed += r.avg_speed;
    c.ms += r.plan_ms;
    c.violations += r.violations;
    c.failures += r.failures;
    ++c.n;
  }
  std::ostringstream os;
  os << std::left << std::setw(12) << "domain" << std::setw(12) << "controller" << std::setw(9)
     << "density" << std::setw(10) << "fraction" << std::setw(6) << "runs" << std::setw(12)
     << "avg_cost" << std::setw(11) << "avg_speed" << std::setw(9) << "plan_ms" << std::setw(6)
     << "viol" << "fail\n";
  os << std::fixed << std::setprecision(3);
  for (const auto& [key, c] : cells) {
    os << std::left << std::setw(12) << std::get<0>(key) << std::setw(12) << std::get<1>(key)
       << std::setw(9) << std::get<2>(key) << std::setw(10) << std::get<3>(key) << std::setw(6)
       << c.n << std::setw(12) << c.cost / c.n << std::setw(11) << c.speed / c.n << std::setw(9)
       << c.ms / c.n << std::setw(6) << c.violations << c.failures << '\n';
  }
  return os.str();
}

void write_plan_records(const std::vector<PlanRecord>& records, std::ostream& os) {
  os << std::setprecision(12);
  for (const PlanRecord& r : records) {
    os << r.timestamp << ' ' << to_string(r.status) << ' ' << r.outer_iters << " belief:";
    for (int i = 0; i < r.belief.size(); ++i) os << ' ' << r.belief[i];
    os << " executed:";
    for (int i = 0; i < r.executed.size(); ++i) os << ' ' << r.executed[i];
    os << '\n';
  }
}

}  // namespace treeopt
