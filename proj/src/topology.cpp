#include "treeopt/topology.hpp"

#include <algorithm>
#include <cmath>

namespace treeopt {

std::vector<std::vector<int>> TreeTopology::children() const {
  std::vector<std::vector<int>> out(node_count);
  for (int i = 0; i < node_count; ++i)
    if (parent[i] >= 0) out[parent[i]].push_back(i);
  return out;
}

std::vector<int> TreeTopology::leaves() const {
  std::vector<bool> has_child(node_count, false);
  for (int i = 0; i < node_count; ++i)
    if (parent[i] >= 0) has_child[parent[i]] = true;
  std::vector<int> out;
  for (int i = 0; i < node_count; ++i)
    if (!has_child[i]) out.push_back(i);
  return out;
}

std::vector<int> TreeTopology::path_to(int node) const {
  std::vector<int> path;
  for (int i = node; i >= 0; i = parent[i]) path.push_back(i);
  std::reverse(path.begin(), path.end());
  return path;
}

int TreeTopology::first_branching() const {
  auto kids = children();
  for (int i = 0; i < node_count; ++i)
    if (kids[i].size() > 1) return i;
  return -1;
}

void TreeTopology::validate() const {
  if (node_count < 1) throw std::invalid_argument("topology needs at least one node");
  if (static_cast<int>(parent.size()) != node_count ||
      static_cast<int>(reach_prob.size()) != node_count)
    throw std::invalid_argument("topology field sizes inconsistent");
  if (parent[0] != -1) throw std::invalid_argument("node 0 must be the root");
  for (int i = 1; i < node_count; ++i)
    if (parent[i] < 0 || parent[i] >= i)
      throw std::invalid_argument("nodes must be indexed depth-first (parent before child)");

  // depth-first indexing: a preorder DFS visiting children in index order
  // must enumerate 0..node_count-1 in place.
  {
    auto kids = children();
    std::vector<int> stack = {0};
    int visit = 0;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      if (u != visit++)
        throw std::invalid_argument("subtree indices must be contiguous (depth-first)");
      for (auto it = kids[u].rbegin(); it != kids[u].rend(); ++it) stack.push_back(*it);
    }
  }
  if (static_cast<int>(depth_first_order.size()) == node_count) {
    for (int i = 0; i < node_count; ++i)
      if (depth_first_order[i] != i)
        throw std::invalid_argument("depth_first_order must witness identity indexing");
  }

  if (std::abs(reach_prob[0] - 1.0) > 1e-12)
    throw std::invalid_argument("root reach probability must be 1");
  auto kids = children();
  for (int i = 0; i < node_count; ++i) {
    if (kids[i].empty()) continue;
    double sum = 0.0;
    for (int c : kids[i]) sum += reach_prob[c];
    if (kids[i].size() == 1) {
      if (std::abs(reach_prob[kids[i][0]] - reach_prob[i]) > 1e-12)
        throw std::invalid_argument("reach probability must be constant along chains");
    } else if (std::abs(sum - reach_prob[i]) > 1e-12) {
      throw std::invalid_argument("child reach probabilities must sum to the parent's");
    }
  }
}

TreeTopology TreeTopology::chain(int length) {
  TreeTopology t;
  t.node_count = length;
  t.parent.resize(length);
  t.reach_prob.assign(length, 1.0);
  t.depth_first_order.resize(length);
  for (int i = 0; i < length; ++i) {
    t.parent[i] = i - 1;
    t.depth_first_order[i] = i;
  }
  return t;
}

TreeTopology build_qmdp_topology(int num_hypotheses, int trunk_len, int branch_len,
                                 const BeliefState& belief) {
  if (trunk_len < 1) throw std::invalid_argument("trunk length must be >= 1");
  if (branch_len < 1) throw std::invalid_argument("branch length must be >= 1");
  if (num_hypotheses < 1) throw std::invalid_argument("need at least one hypothesis");
  if (belief.size() != num_hypotheses) throw std::invalid_argument("belief size mismatch");

  TreeTopology t;
  if (num_hypotheses == 1) {
    t = TreeTopology::chain(trunk_len + branch_len);
    return t;
  }
  t.node_count = trunk_len + num_hypotheses * branch_len;
  t.parent.resize(t.node_count);
  t.reach_prob.resize(t.node_count);
  t.depth_first_order.resize(t.node_count);
  for (int i = 0; i < trunk_len; ++i) {
    t.parent[i] = i - 1;
    t.reach_prob[i] = 1.0;
  }
  int at = trunk_len;
  for (int m = 0; m < num_hypotheses; ++m) {
    for (int j = 0; j < branch_len; ++j, ++at) {
      t.parent[at] = j == 0 ? trunk_len - 1 : at - 1;
      t.reach_prob[at] = belief.probs[m];
    }
  }
  for (int i = 0; i < t.node_count; ++i) t.depth_first_order[i] = i;
  t.validate();
  return t;
}

}  // namespace treeopt
