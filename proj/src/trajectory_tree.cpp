#include "treeopt/trajectory_tree.hpp"

#include <iomanip>
#include <sstream>

namespace treeopt {

void TrajectoryTree::validate() const {
  topology.validate();
  if (dim < 1) throw std::invalid_argument("configuration dimension must be >= 1");
  if (static_cast<int>(configs.size()) != topology.node_count)
    throw std::invalid_argument("one configuration per node required");
  if (static_cast<int>(prefix.size()) != order)
    throw std::invalid_argument("prefix length must equal the motion order");
  for (const Vec& c : configs) {
    if (c.size() != dim) throw std::invalid_argument("configuration dimension mismatch");
    if (!c.allFinite()) throw std::invalid_argument("configurations must be finite");
  }
  for (const Vec& c : prefix)
    if (c.size() != dim) throw std::invalid_argument("prefix dimension mismatch");
}

Vec TrajectoryTree::stacked() const {
  Vec x(topology.node_count * dim);
  for (int i = 0; i < topology.node_count; ++i) x.segment(i * dim, dim) = configs[i];
  return x;
}

void TrajectoryTree::set_from_stacked(const Vec& x) {
  if (x.size() != topology.node_count * dim)
    throw std::invalid_argument("stacked vector size mismatch");
  configs.resize(topology.node_count);
  for (int i = 0; i < topology.node_count; ++i) configs[i] = x.segment(i * dim, dim);
}

std::vector<int> ancestor_tuple_nodes(const TreeTopology& topology, int node, int k) {
  if (node < 0 || node >= topology.node_count) throw std::invalid_argument("invalid node index");
  std::vector<int> slots(k + 1);
  int current = node;
  for (int s = k; s >= 0; --s) {
    slots[s] = current;
    current = current >= 0 ? topology.parent[current] : current - 1;
  }
  // Nodes above the root map into the prefix; mark them -1 here. The caller
  // recovers the prefix slot from the position: the j-th slot with value -1
  // counted from the left corresponds to prefix[k - <slots above root>]...
  for (int s = 0; s <= k; ++s)
    if (slots[s] < 0) slots[s] = -1;
  return slots;
}

Vec ancestor_tuple(const TrajectoryTree& tree, int node, int k) {
  const int d = tree.dim;
  Vec tuple((k + 1) * d);
  // Walk the ancestor chain from the node upward; slots above the root come
  // from the prefix, nearest-first.
  int current = node;
  int prefix_at = static_cast<int>(tree.prefix.size()) - 1;
  for (int s = k; s >= 0; --s) {
    if (current >= 0) {
      tuple.segment(s * d, d) = tree.configs[current];
      current = tree.topology.parent[current];
    } else {
      if (prefix_at < 0) throw std::invalid_argument("ancestor tuple exceeds the prefix");
      tuple.segment(s * d, d) = tree.prefix[prefix_at--];
    }
  }
  return tuple;
}

void save_tree(const TrajectoryTree& tree, std::ostream& os) {
  os << "#tree d=" << tree.dim << " k=" << tree.order << " N=" << tree.topology.node_count
     << '\n';
  os << std::setprecision(17);
  for (int i = 0; i < tree.topology.node_count; ++i) {
    os << i << ' ' << tree.topology.parent[i] << ' ' << tree.topology.reach_prob[i];
    for (int j = 0; j < tree.dim; ++j) os << ' ' << tree.configs[i][j];
    os << '\n';
  }
  for (const Vec& p : tree.prefix) {
    os << "#prefix";
    for (int j = 0; j < tree.dim; ++j) os << ' ' << p[j];
    os << '\n';
  }
}

TrajectoryTree load_tree(std::istream& is) {
  TrajectoryTree tree;
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("empty tree file");
  int d = 0, k = 0, n = 0;
  if (std::sscanf(line.c_str(), "#tree d=%d k=%d N=%d", &d, &k, &n) != 3)
    throw std::invalid_argument("malformed tree header");
  tree.dim = d;
  tree.order = k;
  tree.topology.node_count = n;
  tree.topology.parent.resize(n);
  tree.topology.reach_prob.resize(n);
  tree.topology.depth_first_order.resize(n);
  tree.configs.resize(n);
  for (int i = 0; i < n; ++i) {
    if (!std::getline(is, line)) throw std::invalid_argument("truncated tree file");
    std::istringstream row(line);
    int id;
    row >> id >> tree.topology.parent[i] >> tree.topology.reach_prob[i];
    if (id != i) throw std::invalid_argument("tree rows must be in depth-first order");
    tree.configs[i].resize(d);
    for (int j = 0; j < d; ++j) row >> tree.configs[i][j];
    if (!row) throw std::invalid_argument("malformed tree row");
    tree.topology.depth_first_order[i] = i;
  }
  while (std::getline(is, line)) {
    if (line.rfind("#prefix", 0) != 0) continue;
    std::istringstream row(line.substr(7));
    Vec p(d);
    for (int j = 0; j < d; ++j) row >> p[j];
    if (!row) throw std::invalid_argument("malformed prefix row");
    tree.prefix.push_back(p);
  }
  tree.validate();
  return tree;
}

}  // namespace treeopt
