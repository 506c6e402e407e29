#pragma once

#include "treeopt/nlp.hpp"

namespace treeopt {

/// Maps subproblem variables onto the consensus vector. Entry j of
/// local_index[m] is the index into subproblem m's variables that is
/// constrained to consensus entry j, or -1 when subproblem m does not
/// contribute to that entry.
struct SharedVariableMap {
  int consensus_dim = 0;
  std::vector<std::vector<int>> local_index;

  /// Shared block = the first `shared_dim` variables of every subproblem.
  static SharedVariableMap leading_block(int n_subproblems, int shared_dim);

  void validate(const std::vector<int>& subproblem_dims) const;

  /// Gathers the consensus-mapped entries of subproblem m's iterate; entries
  /// without contribution keep the fallback value.
  Vec gather(int m, const Vec& z, const Vec& fallback) const;
};

struct Subproblem {
  NlpProblem nlp;
  double weight = 1.0;
};

/// N loosely coupled subproblems min sum_m w_m c_m(z_m) with per-subproblem
/// constraints and a consensus constraint on the shared entries.
struct StructuredProblem {
  std::vector<Subproblem> subproblems;
  SharedVariableMap shared;

  int num_subproblems() const { return static_cast<int>(subproblems.size()); }
  std::vector<int> dims() const;
  /// Solvers accept any positive total weight (the argmin is invariant under
  /// a common scaling); builders emit normalized weights.
  void validate(bool require_normalized = true) const;
};

/// Undecomposed baseline: one problem over the deduplicated variable set.
/// Layout: consensus entries first, then each subproblem's private variables
/// in order. When a consensus entry has no contributor it is dropped.
struct FlattenedProblem {
  NlpProblem nlp;
  std::vector<std::vector<int>> var_map;  // per subproblem: local -> global
  int shared_dim = 0;

  Vec gather_subproblem(int m, const Vec& x) const;
};

FlattenedProblem joint_flatten(const StructuredProblem& problem);

/// Stacks subproblems without deduplication (each keeps its own copy of the
/// shared entries); used by the two-block reference algorithm.
struct StackedProblem {
  NlpProblem nlp;
  std::vector<int> offsets;  // variable offset of each subproblem
};

StackedProblem stack_subproblems(const StructuredProblem& problem);

}  // namespace treeopt
