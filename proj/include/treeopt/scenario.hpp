#pragma once

#include "treeopt/daula.hpp"
#include "treeopt/pedestrian.hpp"
#include "treeopt/slalom.hpp"
#include "treeopt/textio.hpp"

#include <random>

namespace treeopt {

enum class Domain { Pedestrian, Slalom };

enum class ControllerKind { TreeK, SingleHypothesis, FullObservability };

const char* to_string(Domain d);
const char* to_string(ControllerKind c);

struct ScenarioConfig {
  Domain domain = Domain::Pedestrian;
  double duration = 60.0;  // simulated seconds
  // pedestrians per km, or mean obstacle spacing in meters
  double density = 20.0;
  // crossing fraction, or false-positive fraction
  double fraction = 0.05;
  uint64_t seed = 0;
  double replan_hz = 10.0;
  ControllerKind controller = ControllerKind::TreeK;
  int tree_branches = 2;

  // simulated perception: displayed probability ramps from the prior toward
  // the ground truth and collapses at the reveal distance
  double reveal_min = 5.0;
  double reveal_max = 15.0;
  double ramp_width = 10.0;
  double horizon_range = 100.0;
  double crossing_duration = 4.0;  // seconds a crosser occupies the road
  double min_gap = 0.0;            // minimum longitudinal spacing between entities

  PedestrianParams pedestrian;
  SlalomParams slalom;
  DaulaConfig solver;
  bool keep_records = false;

  static ScenarioConfig pedestrian_default();
  static ScenarioConfig slalom_default();
  void validate() const;
};

struct ScenarioEntity {
  double x = 0.0;        // longitudinal position along the road
  double lateral = 0.0;  // slalom obstacles only
  bool truth = false;    // crosses / exists
  double reveal_distance = 10.0;
};

struct Scenario {
  double road_length = 0.0;
  std::vector<ScenarioEntity> entities;  // ordered by x
};

/// Deterministic for a seed: positions by a Poisson process (exponential
/// gaps), truths Bernoulli, reveal distances uniform.
Scenario generate_scenario(const ScenarioConfig& config);

/// Scene files: `[ego]` with x/v (pedestrian) or x/y/theta (slalom), then one
/// `[pedestrian]`/`[obstacle]` section per entity with keys x, p, truth (and
/// y for obstacles).
PedestrianScene load_pedestrian_scene(std::istream& is);
SlalomScene load_slalom_scene(std::istream& is, const SlalomParams& params);

ScenarioConfig load_scenario_config(std::istream& is);

}  // namespace treeopt
