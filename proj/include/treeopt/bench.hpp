#pragma once

#include "treeopt/scenario.hpp"

#include <ostream>

namespace treeopt {

enum class Transcription { Shooting, TKomo };
enum class BenchSolver { DAuLa, JointAuLa };

const char* to_string(Transcription t);
const char* to_string(BenchSolver s);

struct BenchCell {
  int branches = 0;
  Transcription transcription = Transcription::Shooting;
  BenchSolver solver = BenchSolver::DAuLa;
  double median_ms = 0.0;
  int repeats = 0;
  int outer_iters = 0;
};

/// Wall-clock medians for solving the same synthetic instance with the
/// decomposed and the undecomposed solver. Shooting instances are dense
/// per-branch QPs (the joint solve uses dense factorization); tree-KOMO
/// instances use sparse factorization on both sides.
std::vector<BenchCell> scaling_benchmark(const std::vector<int>& branch_counts,
                                         Transcription transcription,
                                         const std::vector<BenchSolver>& solvers,
                                         int repeats = 5);

/// Columns: transcription,solver,branches,median_ms,repeats,outer_iters
void write_bench_csv(const std::vector<BenchCell>& cells, std::ostream& os);

/// Least-squares fit quality of median time vs branch count (R^2 of a linear
/// fit through the cells of one solver).
double linear_fit_r2(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace treeopt
