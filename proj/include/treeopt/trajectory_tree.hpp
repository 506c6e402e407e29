#pragma once

#include "treeopt/topology.hpp"

#include <istream>

namespace treeopt {

/// Tree-indexed configurations plus the k fixed configurations preceding the
/// root (boundary history, oldest first).
struct TrajectoryTree {
  TreeTopology topology;
  int dim = 0;    // configuration dimension d
  int order = 0;  // motion order k = prefix length
  std::vector<Vec> configs;  // one d-vector per node
  std::vector<Vec> prefix;   // k d-vectors, prefix[0] is the oldest

  void validate() const;

  /// Flat view of all configurations in node order (N*d entries).
  Vec stacked() const;
  void set_from_stacked(const Vec& x);
};

/// Concatenation (psi_{alpha(i,k)}, ..., psi_{alpha(i,1)}, psi_i); draws from
/// the prefix when the ancestor chain exits the root.
Vec ancestor_tuple(const TrajectoryTree& tree, int node, int k);

/// Node indices of the optimized configurations inside the tuple of `node`
/// (prefix slots are marked -1), oldest slot first.
std::vector<int> ancestor_tuple_nodes(const TreeTopology& topology, int node, int k);

/// Line-based text export. Header `#tree d=<d> k=<k> N=<N>`, then one line
/// per node in depth-first order: `id parent_id reach_prob v1 ... vd`.
/// Prefix rows follow as `#prefix v1 ... vd`.
void save_tree(const TrajectoryTree& tree, std::ostream& os);
TrajectoryTree load_tree(std::istream& is);

}  // namespace treeopt
