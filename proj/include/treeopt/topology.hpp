#pragma once

#include "treeopt/belief.hpp"

namespace treeopt {

/// Tree of trajectory nodes, indexed depth-first. Node 0 is the root; every
/// node's parent has a smaller index and subtrees occupy contiguous ranges.
struct TreeTopology {
  int node_count = 0;
  std::vector<int> parent;        // -1 at the root
  std::vector<double> reach_prob; // p_i, probability of visiting node i
  std::vector<int> depth_first_order;  // permutation witnessing the indexing

  std::vector<std::vector<int>> children() const;
  std::vector<int> leaves() const;
  /// Root-to-node path, inclusive.
  std::vector<int> path_to(int node) const;
  /// Index of the first node with more than one child, or -1 for a chain.
  int first_branching() const;

  /// Checks: single root, acyclic DF indexing, p_root = 1, probability flow
  /// conservation at every branching, p constant along chains.
  void validate() const;

  static TreeTopology chain(int length);
};

/// QMDP-style topology: one trunk chain of length trunk_len at p = 1, then
/// one branch of length branch_len per hypothesis, at the belief probability.
/// Zero-probability hypotheses keep their branch: constraints are enforced
/// uniformly no matter how unlikely the state.
TreeTopology build_qmdp_topology(int num_hypotheses, int trunk_len, int branch_len,
                                 const BeliefState& belief);

}  // namespace treeopt
