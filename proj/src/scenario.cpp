#include "treeopt/scenario.hpp"

#include <sstream>

namespace treeopt {

const char* to_string(Domain d) {
  return d == Domain::Pedestrian ? "pedestrian" : "slalom";
}

const char* to_string(ControllerKind c) {
  switch (c) {
    case ControllerKind::TreeK: return "tree";
    case ControllerKind::SingleHypothesis: return "single_hyp";
    case ControllerKind::FullObservability: return "full_obs";
  }
  return "unknown";
}

ScenarioConfig ScenarioConfig::pedestrian_default() {
  ScenarioConfig cfg;
  cfg.domain = Domain::Pedestrian;
  cfg.solver.inner.eps_pri = 1e-4;
  cfg.solver.inner.eps_opt = 1e-4;
  cfg.solver.inner.penalty_growth = true;
  cfg.solver.rho = 20.0;
  cfg.solver.xi_pri = 1e-3;
  cfg.solver.xi_dual = 1e-4;
  cfg.solver.max_outer = 120;
  return cfg;
}

ScenarioConfig ScenarioConfig::slalom_default() {
  ScenarioConfig cfg;
  cfg.domain = Domain::Slalom;
  cfg.density = 17.0;    // mean obstacle spacing in meters
  cfg.fraction = 0.75;   // false positives
  cfg.tree_branches = 4;
  cfg.solver.inner.eps_pri = 1e-3;
  cfg.solver.inner.eps_opt = 1e-2;
  cfg.solver.inner.penalty_growth = true;
  cfg.solver.rho = 2.0;
  cfg.solver.xi_pri = 1e-2;
  cfg.solver.xi_dual = 5e-3;
  cfg.solver.max_outer = 60;
  cfg.horizon_range = 38.0;
  cfg.min_gap = 6.0;  // distinct obstacles, not walls
  return cfg;
}

void ScenarioConfig::validate() const {
  if (duration <= 0) throw std::invalid_argument("duration must be positive");
  if (fraction < 0 || fraction > 1) throw std::invalid_argument("fraction must be in [0,1]");
  if (density < 0) throw std::invalid_argument("density must be nonnegative");
  if (replan_hz <= 0) throw std::invalid_argument("replan_hz must be positive");
  if (tree_branches < 2) throw std::invalid_argument("tree controller needs >= 2 branches");
  if (reveal_min <= 0 || reveal_max < reveal_min)
    throw std::invalid_argument("invalid reveal distance range");
}

Scenario generate_scenario(const ScenarioConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> reveal(config.reveal_min, config.reveal_max);

  Scenario scenario;
  const double v_ref =
      config.domain == Domain::Pedestrian ? config.pedestrian.v_des : config.slalom.v_des;
  scenario.road_length = config.duration * v_ref * 1.2 + 100.0;

  if (config.density <= 0.0) return scenario;
  const double mean_gap =
      config.domain == Domain::Pedestrian ? 1000.0 / config.density : config.density;
  std::exponential_distribution<double> gap(1.0 / mean_gap);

  double x = 20.0;
  while (true) {
    x += std::max(config.min_gap, gap(rng));
    if (x > scenario.road_length) break;
    ScenarioEntity entity;
    entity.x = x;
    const double truth_prob =
        config.domain == Domain::Pedestrian ? config.fraction : 1.0 - config.fraction;
    entity.truth = u01(rng) < truth_prob;
    entity.reveal_distance = reveal(rng);
    entity.lateral =
        config.domain == Domain::Slalom ? 0.5 * (u01(rng) - 0.5) : 0.0;
    scenario.entities.push_back(entity);
  }
  return scenario;
}

PedestrianScene load_pedestrian_scene(std::istream& is) {
  PedestrianScene scene;
  for (const KvSection& section : parse_kv_file(is)) {
    if (section.name == "ego") {
      scene.ego_x = section.number_or("x", 0.0);
      scene.ego_v = section.number_or("v", 0.0);
    } else if (section.name == "pedestrian") {
      PedestrianAhead ped;
      ped.x = section.number("x");
      ped.p_cross = section.number_or("p", 0.0);
      ped.truth = static_cast<int>(section.number_or("truth", -1));
      scene.pedestrians.push_back(ped);
    }
  }
  scene.validate();
  return scene;
}

SlalomScene load_slalom_scene(std::istream& is, const SlalomParams& params) {
  SlalomScene scene;
  for (const KvSection& section : parse_kv_file(is)) {
    if (section.name == "ego") {
      scene.ego_pose.resize(3);
      scene.ego_pose << section.number_or("x", 0.0), section.number_or("y", 0.0),
          section.number_or("theta", 0.0);
    } else if (section.name == "obstacle") {
      SlalomObstacle obstacle;
      obstacle.center << section.number("x"), section.number_or("y", 0.0);
      obstacle.p_exist = section.number_or("p", 1.0);
      obstacle.truth = static_cast<int>(section.number_or("truth", -1));
      scene.obstacles.push_back(obstacle);
    }
  }
  // rest at the start unless a history is supplied
  Vec prev = scene.ego_pose;
  prev[0] -= params.v_des * params.dt * std::cos(scene.ego_pose[2]);
  prev[1] -= params.v_des * params.dt * std::sin(scene.ego_pose[2]);
  scene.pose_history = {prev};
  scene.validate();
  return scene;
}

ScenarioConfig load_scenario_config(std::istream& is) {
  std::vector<KvSection> sections = parse_kv_file(is);
  const KvSection* main = &sections.front();
  for (const KvSection& s : sections)
    if (s.name == "scenario") main = &s;

  const std::string domain = main->text_or("domain", "pedestrian");
  ScenarioConfig cfg = domain == "slalom" ? ScenarioConfig::slalom_default()
                                          : ScenarioConfig::pedestrian_default();
  cfg.duration = main->number_or("duration", cfg.duration);
  cfg.density = main->number_or("density", cfg.density);
  cfg.fraction = main->number_or("fraction", cfg.fraction);
  cfg.seed = static_cast<uint64_t>(main->number_or("seed", 0));
  cfg.replan_hz = main->number_or("replan_hz", cfg.replan_hz);
  cfg.tree_branches = static_cast<int>(main->number_or("branches", cfg.tree_branches));
  cfg.reveal_min = main->number_or("reveal_min", cfg.reveal_min);
  cfg.reveal_max = main->number_or("reveal_max", cfg.reveal_max);
  cfg.ramp_width = main->number_or("ramp_width", cfg.ramp_width);
  cfg.horizon_range = main->number_or("horizon", cfg.horizon_range);
  cfg.crossing_duration = main->number_or("crossing_duration", cfg.crossing_duration);
  cfg.min_gap = main->number_or("min_gap", cfg.min_gap);
  const std::string controller = main->text_or("controller", "tree");
  if (controller == "tree")
    cfg.controller = ControllerKind::TreeK;
  else if (controller == "single_hyp")
    cfg.controller = ControllerKind::SingleHypothesis;
  else if (controller == "full_obs")
    cfg.controller = ControllerKind::FullObservability;
  else
    throw std::invalid_argument("unknown controller: " + controller);
  cfg.validate();
  return cfg;
}

}  // namespace treeopt
