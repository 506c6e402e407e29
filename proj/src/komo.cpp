#include "treeopt/komo.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace treeopt {

std::vector<std::pair<int, int>> hessian_sparsity(const TreeTopology& topology, int k) {
  topology.validate();
  std::set<std::pair<int, int>> pairs;
  for (int node = 0; node < topology.node_count; ++node) {
    std::vector<int> slots = ancestor_tuple_nodes(topology, node, k);
    for (size_t a = 0; a < slots.size(); ++a) {
      if (slots[a] < 0) continue;
      for (size_t b = a; b < slots.size(); ++b) {
        if (slots[b] < 0) continue;
        int i = slots[a], j = slots[b];
        if (i > j) std::swap(i, j);
        pairs.insert({i, j});
      }
    }
  }
  return {pairs.begin(), pairs.end()};
}

CouplingPattern expand_pattern(const std::vector<std::pair<int, int>>& node_pairs, int d,
                               int node_count) {
  CouplingPattern pattern;
  pattern.dim = node_count * d;
  for (const auto& [i, j] : node_pairs)
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) {
        int u = i * d + a, v = j * d + b;
        if (u > v) std::swap(u, v);
        pattern.pairs.emplace_back(u, v);
      }
  std::sort(pattern.pairs.begin(), pattern.pairs.end());
  pattern.pairs.erase(std::unique(pattern.pairs.begin(), pattern.pairs.end()),
                      pattern.pairs.end());
  return pattern;
}

namespace {

// Gather/scatter bookkeeping for one node's tuple inside the stacked vector.
struct TuplePlan {
  int node = 0;
  std::vector<int> slot_node;    // >= 0: tree node, -1: prefix slot
  std::vector<int> slot_prefix;  // prefix index for slots marked -1
};

TuplePlan make_plan(const TreeTopology& topology, int node, int k) {
  TuplePlan plan;
  plan.node = node;
  plan.slot_node = ancestor_tuple_nodes(topology, node, k);
  plan.slot_prefix.assign(k + 1, -1);
  int missing = 0;
  for (int s = 0; s <= k; ++s)
    if (plan.slot_node[s] < 0) ++missing;
  int at = k - missing;  // prefix entries used are the newest `missing` ones
  for (int s = 0; s <= k; ++s)
    if (plan.slot_node[s] < 0) plan.slot_prefix[s] = at++;
  return plan;
}

Vec gather_tuple(const TuplePlan& plan, const Vec& x, const std::vector<Vec>& prefix, int d) {
  Vec tuple(static_cast<int>(plan.slot_node.size()) * d);
  for (size_t s = 0; s < plan.slot_node.size(); ++s) {
    if (plan.slot_node[s] >= 0)
      tuple.segment(s * d, d) = x.segment(plan.slot_node[s] * d, d);
    else
      tuple.segment(s * d, d) = prefix[plan.slot_prefix[s]];
  }
  return tuple;
}

struct TranscribedBlock {
  TuplePlan plan;
  VectorEvaluator eval;
  int rows = 0;
  int row_offset = 0;
  double scale = 1.0;  // applied to values and Jacobians
};

VectorEvaluator make_block_evaluator(std::vector<TranscribedBlock> blocks, int total_rows,
                                     std::vector<Vec> prefix, int d, int global_dim) {
  return [blocks = std::move(blocks), total_rows, prefix = std::move(prefix), d, global_dim](
             const Vec& x, Vec& value, SpMat* jac) {
    value.resize(total_rows);
    std::vector<Triplet> triplets;
    Vec v;
    for (const TranscribedBlock& block : blocks) {
      const Vec tuple = gather_tuple(block.plan, x, prefix, d);
      v.resize(block.rows);
      if (jac) {
        SpMat J;
        block.eval(tuple, v, &J);
        for (int k = 0; k < J.outerSize(); ++k)
          for (SpMat::InnerIterator it(J, k); it; ++it) {
            const int slot = static_cast<int>(it.col()) / d;
            const int node = block.plan.slot_node[slot];
            if (node < 0) continue;  // prefix columns are fixed data
            triplets.emplace_back(block.row_offset + static_cast<int>(it.row()),
                                  node * d + static_cast<int>(it.col()) % d,
                                  block.scale * it.value());
          }
      } else {
        block.eval(tuple, v, nullptr);
      }
      value.segment(block.row_offset, block.rows) = block.scale * v;
    }
    if (jac) {
      jac->resize(total_rows, global_dim);
      jac->setFromTriplets(triplets.begin(), triplets.end());
    }
  };
}

}  // namespace

NlpProblem tkomo_transcribe(const TrajectoryTree& tree, const KOrderObjective& objective) {
  if (objective.order != tree.order)
    throw std::invalid_argument("objective order must match the tree prefix length");
  if (objective.dim != tree.dim) throw std::invalid_argument("objective dimension mismatch");
  tree.topology.validate();
  const int N = tree.topology.node_count;
  const int d = tree.dim;
  const int k = tree.order;

  NlpProblem out;
  out.dim = N * d;

  std::vector<TranscribedBlock> cost_blocks, ineq_blocks, eq_blocks;
  int cost_rows = 0, ineq_rows = 0, eq_rows = 0;
  for (int i = 0; i < N; ++i) {
    NodeObjective node = objective.node(i);
    TuplePlan plan = make_plan(tree.topology, i, k);
    if (node.dim_cost > 0) {
      cost_blocks.push_back({plan, node.cost_residuals, node.dim_cost, cost_rows,
                             std::sqrt(tree.topology.reach_prob[i])});
      cost_rows += node.dim_cost;
    }
    if (node.dim_ineq > 0) {
      ineq_blocks.push_back({plan, node.ineq, node.dim_ineq, ineq_rows, 1.0});
      ineq_rows += node.dim_ineq;
    }
    if (node.dim_eq > 0) {
      eq_blocks.push_back({plan, node.eq, node.dim_eq, eq_rows, 1.0});
      eq_rows += node.dim_eq;
    }
  }

  VectorEvaluator residuals =
      make_block_evaluator(std::move(cost_blocks), cost_rows, tree.prefix, d, out.dim);
  out.dim_residual = cost_rows;
  out.residual_form = residuals;
  out.cost = [residuals, cost_rows](const Vec& x, Vec* grad) {
    Vec r(cost_rows);
    if (grad) {
      SpMat J;
      residuals(x, r, &J);
      *grad = 2.0 * (J.transpose() * r);
    } else {
      residuals(x, r, nullptr);
    }
    return r.squaredNorm();
  };
  if (ineq_rows > 0) {
    out.dim_ineq = ineq_rows;
    out.ineq = make_block_evaluator(std::move(ineq_blocks), ineq_rows, tree.prefix, d, out.dim);
  }
  if (eq_rows > 0) {
    out.dim_eq = eq_rows;
    out.eq = make_block_evaluator(std::move(eq_blocks), eq_rows, tree.prefix, d, out.dim);
  }
  out.sparsity = expand_pattern(hessian_sparsity(tree.topology, k), d, N);
  return out;
}

namespace {

// Internal tree for a subproblem: a slice of the global tree with remapped
// parents and rescaled reach probabilities.
TrajectoryTree make_subtree(const TrajectoryTree& tree, const std::vector<int>& nodes,
                            const std::vector<double>& internal_reach) {
  TrajectoryTree sub;
  sub.dim = tree.dim;
  sub.order = tree.order;
  sub.prefix = tree.prefix;
  const int n = static_cast<int>(nodes.size());
  sub.topology.node_count = n;
  sub.topology.parent.resize(n);
  sub.topology.reach_prob = internal_reach;
  sub.topology.depth_first_order.resize(n);
  std::vector<int> local_of_global(tree.topology.node_count, -1);
  for (int t = 0; t < n; ++t) local_of_global[nodes[t]] = t;
  for (int t = 0; t < n; ++t) {
    const int gp = tree.topology.parent[nodes[t]];
    sub.topology.parent[t] = gp < 0 ? -1 : local_of_global[gp];
    sub.topology.depth_first_order[t] = t;
    sub.configs.push_back(tree.configs.empty() ? Vec::Zero(tree.dim) : tree.configs[nodes[t]]);
  }
  return sub;
}

KOrderObjective slice_objective(const KOrderObjective& objective, std::vector<int> nodes) {
  KOrderObjective sliced;
  sliced.order = objective.order;
  sliced.dim = objective.dim;
  sliced.node = [inner = objective.node, nodes = std::move(nodes)](int t) {
    return inner(nodes[t]);
  };
  return sliced;
}

}  // namespace

SplitResult split_to_structured(const TrajectoryTree& tree, const KOrderObjective& objective,
                                SplitScheme scheme) {
  tree.topology.validate();
  SplitResult result;

  const int branching = tree.topology.first_branching();
  if (branching < 0) {
    // chain: identity structure
    result.structured.subproblems.push_back({tkomo_transcribe(tree, objective), 1.0});
    result.structured.shared.consensus_dim = 0;
    result.structured.shared.local_index.resize(1);
    std::vector<int> nodes(tree.topology.node_count);
    for (int i = 0; i < tree.topology.node_count; ++i) nodes[i] = i;
    result.node_of_slot.push_back(nodes);
    return result;
  }

  const int d = tree.dim;
  auto kids = tree.topology.children();

  if (scheme == SplitScheme::Branches) {
    const std::vector<int> leaves = tree.topology.leaves();
    // A node is consensus-coupled when >= 2 root-to-leaf paths contain it.
    std::vector<int> paths_through(tree.topology.node_count, 0);
    std::vector<std::vector<int>> paths;
    for (int leaf : leaves) {
      paths.push_back(tree.topology.path_to(leaf));
      for (int node : paths.back()) ++paths_through[node];
    }
    std::vector<int> shared_nodes;
    std::vector<int> consensus_of_node(tree.topology.node_count, -1);
    for (int i = 0; i < tree.topology.node_count; ++i)
      if (paths_through[i] >= 2) {
        consensus_of_node[i] = static_cast<int>(shared_nodes.size());
        shared_nodes.push_back(i);
      }

    double weight_sum = 0.0;
    for (int leaf : leaves) weight_sum += tree.topology.reach_prob[leaf];

    result.structured.shared.consensus_dim = static_cast<int>(shared_nodes.size()) * d;
    for (size_t p = 0; p < paths.size(); ++p) {
      const std::vector<int>& path = paths[p];
      TrajectoryTree chain =
          make_subtree(tree, path, std::vector<double>(path.size(), 1.0));
      NlpProblem nlp = tkomo_transcribe(chain, slice_objective(objective, path));
      result.structured.subproblems.push_back(
          {std::move(nlp), tree.topology.reach_prob[leaves[p]] / weight_sum});
      result.node_of_slot.push_back(path);

      std::vector<int> index(result.structured.shared.consensus_dim, -1);
      for (size_t t = 0; t < path.size(); ++t) {
        const int c = consensus_of_node[path[t]];
        if (c < 0) continue;
        for (int j = 0; j < d; ++j) index[c * d + j] = static_cast<int>(t) * d + j;
      }
      result.structured.shared.local_index.push_back(std::move(index));
    }
    result.structured.validate();
    return result;
  }

  // Subtrees scheme: trunk replicated per child subtree of the first branching.
  std::vector<int> trunk = tree.topology.path_to(branching);
  const double trunk_reach = tree.topology.reach_prob[branching];
  result.structured.shared.consensus_dim = static_cast<int>(trunk.size()) * d;

  double weight_sum = 0.0;
  for (int child : kids[branching]) weight_sum += tree.topology.reach_prob[child];

  for (int child : kids[branching]) {
    // contiguous depth-first range of the child's subtree
    int last = child;
    while (last + 1 < tree.topology.node_count) {
      int probe = last + 1;
      while (probe > child) probe = tree.topology.parent[probe];
      if (probe != child) break;
      ++last;
    }
    std::vector<int> nodes = trunk;
    std::vector<double> reach(trunk.size(), trunk_reach);
    const double mass = tree.topology.reach_prob[child];
    for (int i = child; i <= last; ++i) {
      nodes.push_back(i);
      reach.push_back(tree.topology.reach_prob[i] / mass);
    }
    TrajectoryTree sub = make_subtree(tree, nodes, reach);
    NlpProblem nlp = tkomo_transcribe(sub, slice_objective(objective, nodes));
    result.structured.subproblems.push_back({std::move(nlp), mass / weight_sum});
    result.node_of_slot.push_back(nodes);

    std::vector<int> index(result.structured.shared.consensus_dim);
    for (size_t t = 0; t < trunk.size(); ++t)
      for (int j = 0; j < d; ++j) index[t * d + j] = static_cast<int>(t) * d + j;
    result.structured.shared.local_index.push_back(std::move(index));
  }
  result.structured.validate();
  return result;
}

}  // namespace treeopt
