#pragma once

#include "treeopt/structured.hpp"
#include "treeopt/trajectory_tree.hpp"

namespace treeopt {

/// Per-node objective pieces over the (k+1)-tuple of configurations leading
/// to the node (arity (k+1)*d). Costs are sum-of-squares residual blocks.
struct NodeObjective {
  int dim_cost = 0;
  VectorEvaluator cost_residuals;
  int dim_ineq = 0;
  VectorEvaluator ineq;
  int dim_eq = 0;
  VectorEvaluator eq;
};

/// k-order objective over a trajectory tree: a factory of per-node pieces.
struct KOrderObjective {
  int order = 0;
  int dim = 0;
  std::function<NodeObjective(int node)> node;
};

/// Node-index pairs (i <= j) that share a (k+1)-tuple; for a chain this is
/// the band |i-j| <= k. Grows linearly with the node count.
std::vector<std::pair<int, int>> hessian_sparsity(const TreeTopology& topology, int k);

/// Expands a node-pair pattern into variable-index pairs for d-dimensional
/// configurations.
CouplingPattern expand_pattern(const std::vector<std::pair<int, int>>& node_pairs, int d,
                               int node_count);

/// Transcribes the tree objective into a single problem over the stacked
/// N*d configuration vector: cost sum_i p_i c_i(tuple_i), constraints
/// concatenated, sparsity pattern attached.
NlpProblem tkomo_transcribe(const TrajectoryTree& tree, const KOrderObjective& objective);

enum class SplitScheme { Branches, Subtrees };

/// Decomposition of the tree objective into loosely coupled subproblems.
/// Branches: one subproblem per root-to-leaf path, weighted by the leaf
/// reach probability; every node shared by two or more paths is consensus
/// constrained. Subtrees: one subproblem per child subtree of the first
/// branching, each with a trunk replica; the trunk is the consensus block.
/// A chain topology yields a single-subproblem structure.
struct SplitResult {
  StructuredProblem structured;
  // per subproblem: tree node of each local configuration slot
  std::vector<std::vector<int>> node_of_slot;
};

SplitResult split_to_structured(const TrajectoryTree& tree, const KOrderObjective& objective,
                                SplitScheme scheme);

}  // namespace treeopt
