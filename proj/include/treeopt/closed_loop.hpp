#pragma once

#include "treeopt/scenario.hpp"

#include <ostream>

namespace treeopt {

struct RunMetrics {
  double avg_executed_cost = 0.0;
  double avg_speed = 0.0;
  double avg_plan_time_ms = 0.0;
  int constraint_violations = 0;  // against ground-truth crossers/obstacles only
  int solver_failures = 0;
  int cycles = 0;
  int max_outer_iterations = 0;
  // slalom: minimum executed distance to true obstacles while they are active
  double min_true_clearance = 1e300;
  // slalom executed-cost components (accel, centerline, speed)
  double cost_accel = 0.0, cost_centerline = 0.0, cost_speed = 0.0;
};

struct PlanRecord {
  double timestamp = 0.0;
  Vec belief;             // hypothesis weights in branch order
  SolveStatus status = SolveStatus::Converged;
  int outer_iters = 0;
  Vec executed;           // controls (pedestrian) or pose (slalom) applied this cycle
  DaulaResiduals final_residuals;
  std::vector<DaulaResiduals> residual_history;  // kept for non-converged solves
  Vec scene_dump;  // diagnostics: obstacle (x, y, p) triples of the solve
};

struct RunResult {
  RunMetrics metrics;
  std::vector<PlanRecord> records;
};

/// Lock-stepped sense -> plan -> execute loop at replan_hz; the trunk of the
/// planned tree is executed for one period, then the problem is rebuilt and
/// re-solved warm-started from the previous plan. Deterministic per config.
RunResult run_closed_loop(const ScenarioConfig& config);

struct SummaryRow {
  std::string domain;
  std::string controller;
  double density = 0.0;
  double fraction = 0.0;
  uint64_t seed = 0;
  double avg_cost = 0.0;
  double avg_speed = 0.0;
  double plan_ms = 0.0;
  int violations = 0;
  int failures = 0;
};

SummaryRow summary_row(const ScenarioConfig& config, const RunMetrics& metrics);

/// Columns: domain,controller,density,fraction,seed,avg_cost,avg_speed,plan_ms,violations,failures
void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& os);

/// Text table of per-cell means (cell = domain, controller, density, fraction).
std::string summarize(const std::vector<SummaryRow>& rows);

void write_plan_records(const std::vector<PlanRecord>& records, std::ostream& os);

}  // namespace treeopt
