#include "doctest.h"

#include "treeopt/aula.hpp"
#include "treeopt/daula.hpp"
#include "treeopt/komo.hpp"

#include "oracles.hpp"

#include <random>
#include <sstream>

using namespace treeopt;

namespace {

// Brute-force pair enumeration, independent of hessian_sparsity: checks every
// (i, j) against every node tuple.
std::vector<std::pair<int, int>> brute_force_pairs(const TreeTopology& topology, int k) {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < topology.node_count; ++i)
    for (int j = i; j < topology.node_count; ++j) {
      bool coupled = false;
      for (int t = 0; t < topology.node_count && !coupled; ++t) {
        // collect the ancestors of t down to depth k
        std::vector<int> members;
        int cur = t;
        for (int s = 0; s <= k && cur >= 0; ++s) {
          members.push_back(cur);
          cur = topology.parent[cur];
        }
        bool has_i = false, has_j = false;
        for (int m : members) {
          has_i = has_i || m == i;
          has_j = has_j || m == j;
        }
        coupled = has_i && has_j;
      }
      if (coupled) out.emplace_back(i, j);
    }
  return out;
}

// Trunk 0..4, branch A = 5..7, branch B = 8..10; two branches off node 4.
TreeTopology two_branch_tree(double p_first = 0.5) {
  TreeTopology t;
  t.node_count = 11;
  t.parent = {-1, 0, 1, 2, 3, 4, 5, 6, 4, 8, 9};
  t.reach_prob = {1, 1, 1, 1, 1, p_first, p_first, p_first, 1 - p_first, 1 - p_first,
                  1 - p_first};
  t.depth_first_order.resize(11);
  for (int i = 0; i < 11; ++i) t.depth_first_order[i] = i;
  t.validate();
  return t;
}

TreeTopology random_topology(std::mt19937& rng, int max_nodes) {
  std::uniform_int_distribution<int> n_dist(2, max_nodes);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const int n = n_dist(rng);
  TreeTopology t;
  t.node_count = n;
  t.parent.assign(n, -1);
  t.reach_prob.assign(n, 1.0);
  t.depth_first_order.resize(n);
  // grow depth-first: each new node attaches to the previous node or starts a
  // new branch from a random ancestor of the current path
  std::vector<int> path = {0};
  for (int i = 1; i < n; ++i) {
    if (u01(rng) < 0.75 || path.empty()) {
      t.parent[i] = path.empty() ? 0 : path.back();
      path.push_back(i);
    } else {
      const int up = 1 + static_cast<int>(u01(rng) * (path.size() - 1));
      path.resize(path.size() - up);
      t.parent[i] = path.empty() ? 0 : path.back();
      path.push_back(i);
    }
  }
  // assign branch probabilities by splitting mass at branchings
  auto kids = t.children();
  for (int i = 0; i < n; ++i) {
    if (kids[i].empty()) continue;
    if (kids[i].size() == 1) {
      t.reach_prob[kids[i][0]] = t.reach_prob[i];
    } else {
      Vec w(kids[i].size());
      for (int c = 0; c < w.size(); ++c) w[c] = 0.1 + u01(rng);
      w /= w.sum();
      double used = 0.0;
      for (size_t c = 0; c < kids[i].size(); ++c) {
        double p = c + 1 == kids[i].size() ? t.reach_prob[i] - used : t.reach_prob[i] * w[c];
        t.reach_prob[kids[i][c]] = p;
        used += p;
      }
    }
  }
  for (int i = 0; i < n; ++i) t.depth_first_order[i] = i;
  t.validate();
  return t;
}

// Smooth quadratic-ish k=2 objective: acceleration residuals plus a pull
// toward a per-node target.
KOrderObjective smooth_objective(int d, int k, std::vector<Vec> targets) {
  KOrderObjective obj;
  obj.order = k;
  obj.dim = d;
  obj.node = [d, k, targets = std::move(targets)](int node) {
    NodeObjective n;
    n.dim_cost = 2 * d;
    Vec target = targets[node];
    n.cost_residuals = [d, k, target](const Vec& tuple, Vec& r, SpMat* J) {
      r.resize(2 * d);
      // second difference over the last three slots
      const Vec a = tuple.segment((k - 2) * d, d), b = tuple.segment((k - 1) * d, d),
                c = tuple.segment(k * d, d);
      r.head(d) = c - 2.0 * b + a;
      r.tail(d) = 0.3 * (c - target);
      if (J) {
        std::vector<Triplet> t;
        for (int i = 0; i < d; ++i) {
          t.emplace_back(i, (k - 2) * d + i, 1.0);
          t.emplace_back(i, (k - 1) * d + i, -2.0);
          t.emplace_back(i, k * d + i, 1.0);
          t.emplace_back(d + i, k * d + i, 0.3);
        }
        J->resize(2 * d, (k + 1) * d);
        J->setFromTriplets(t.begin(), t.end());
      }
    };
    return n;
  };
  return obj;
}

TrajectoryTree make_tree(const TreeTopology& topology, int d, int k, std::mt19937& rng) {
  TrajectoryTree tree;
  tree.topology = topology;
  tree.dim = d;
  tree.order = k;
  for (int i = 0; i < topology.node_count; ++i)
    tree.configs.push_back(oracle::random_matrix(rng, d, 1));
  for (int i = 0; i < k; ++i) tree.prefix.push_back(Vec::Zero(d));
  return tree;
}

double fd_hessian_entry(const ScalarEvaluator& f, const Vec& x0, int i, int j, double h) {
  Vec x = x0;
  auto at = [&](double di, double dj) {
    x = x0;
    x[i] += di;
    x[j] += dj;
    return f(x, nullptr);
  };
  return (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
}

}  // namespace

TEST_CASE("posterior determinizes, ignores uninformative observations") {
  BeliefState b = BeliefState::uniform(2);
  BeliefState delta = belief_posterior(b, {1.0, 0.0});
  CHECK(delta.probs[0] == doctest::Approx(1.0));
  CHECK(delta.probs[1] == doctest::Approx(0.0));

  BeliefState same = belief_posterior(b, {1.0, 1.0});
  CHECK(same.probs[0] == doctest::Approx(0.5));

  CHECK_THROWS_AS(belief_posterior(delta, {0.0, 1.0}), InconsistentObservation);
}

TEST_CASE("posterior after ruling out one of six sides") {
  BeliefState b = BeliefState::uniform(6);
  std::vector<double> likelihood(6, 1.0);
  likelihood[2] = 0.0;  // looked at side 2, saw no color
  BeliefState after = belief_posterior(b, likelihood);
  CHECK(after.probs[2] == doctest::Approx(0.0));
  for (int m : {0, 1, 3, 4, 5}) CHECK(after.probs[m] == doctest::Approx(0.2));
  CHECK(after.entropy() < b.entropy());
}

TEST_CASE("expected posterior entropy never exceeds the prior entropy") {
  // Conditioning reduces entropy in expectation over the observation
  // partition; a single unlikely outcome may still raise it.
  std::mt19937 rng(71);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(u01(rng) * 5);
    BeliefState b = BeliefState::uniform(n);
    for (int m = 0; m < n; ++m) b.probs[m] = 0.05 + u01(rng);
    b.probs /= b.probs.sum();
    // random binary partition with both sides nonempty
    std::vector<double> side(n);
    bool has0 = false, has1 = false;
    for (int m = 0; m < n; ++m) {
      side[m] = u01(rng) < 0.5 ? 0.0 : 1.0;
      (side[m] > 0.5 ? has1 : has0) = true;
    }
    if (!has0 || !has1) continue;
    std::vector<double> other(n);
    for (int m = 0; m < n; ++m) other[m] = 1.0 - side[m];
    double p1 = 0.0;
    for (int m = 0; m < n; ++m) p1 += side[m] * b.probs[m];
    const double expected = p1 * belief_posterior(b, side).entropy() +
                            (1.0 - p1) * belief_posterior(b, other).entropy();
    CHECK(expected <= b.entropy() + 1e-12);
  }
}

TEST_CASE("uniform-prior posteriors never gain entropy") {
  std::mt19937 rng(73);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(u01(rng) * 6);
    BeliefState b = BeliefState::uniform(n);
    std::vector<double> like(n);
    int live = 0;
    for (int m = 0; m < n; ++m) {
      like[m] = u01(rng) < 0.5 ? 1.0 : 0.0;
      live += like[m] > 0.5;
    }
    if (live == 0) continue;
    CHECK(belief_posterior(b, like).entropy() <= b.entropy() + 1e-12);
  }
}

TEST_CASE("qmdp topology shapes") {
  SUBCASE("single hypothesis gives a plain chain") {
    TreeTopology t = build_qmdp_topology(1, 4, 16, BeliefState::uniform(1));
    CHECK(t.node_count == 20);
    CHECK(t.first_branching() == -1);
    for (double p : t.reach_prob) CHECK(p == 1.0);
  }
  SUBCASE("two hypotheses, 1s branching horizon at 4 steps/s over 5s") {
    BeliefState b = BeliefState::uniform(2);
    b.probs << 0.3, 0.7;
    TreeTopology t = build_qmdp_topology(2, 4, 16, b);
    CHECK(t.node_count == 36);
    CHECK(t.first_branching() == 3);
    CHECK(t.reach_prob[4] == doctest::Approx(0.3));
    CHECK(t.reach_prob[4 + 16] == doctest::Approx(0.7));
  }
  SUBCASE("four pedestrians in horizon need five branches") {
    BeliefState b = BeliefState::uniform(5);
    TreeTopology t = build_qmdp_topology(5, 4, 16, b);
    CHECK(t.node_count == 4 + 5 * 16);
    auto kids = t.children();
    CHECK(kids[3].size() == 5);
  }
  SUBCASE("zero-probability hypotheses keep their branch") {
    BeliefState b = BeliefState::uniform(2);
    b.probs << 1.0, 0.0;
    TreeTopology t = build_qmdp_topology(2, 2, 3, b);
    CHECK(t.node_count == 2 + 2 * 3);
    CHECK(t.reach_prob.back() == 0.0);
  }
}

TEST_CASE("reach probability flow conservation on random topologies") {
  std::mt19937 rng(79);
  for (int trial = 0; trial < 50; ++trial) {
    TreeTopology t = random_topology(rng, 40);
    auto kids = t.children();
    for (int i = 0; i < t.node_count; ++i) {
      if (kids[i].size() < 2) continue;
      double sum = 0.0;
      for (int c : kids[i]) sum += t.reach_prob[c];
      CHECK(sum == doctest::Approx(t.reach_prob[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("ancestor tuples honor the prefix convention") {
  std::mt19937 rng(83);
  TrajectoryTree tree = make_tree(two_branch_tree(), 2, 2, rng);
  tree.prefix[0] = Vec::Constant(2, -10.0);
  tree.prefix[1] = Vec::Constant(2, -20.0);

  SUBCASE("root draws both prefix slots") {
    Vec t = ancestor_tuple(tree, 0, 2);
    CHECK(t.segment(0, 2) == tree.prefix[0]);
    CHECK(t.segment(2, 2) == tree.prefix[1]);
    CHECK(t.segment(4, 2) == tree.configs[0]);
  }
  SUBCASE("depth-1 node draws the newest prefix slot") {
    Vec t = ancestor_tuple(tree, 1, 2);
    CHECK(t.segment(0, 2) == tree.prefix[1]);
    CHECK(t.segment(2, 2) == tree.configs[0]);
    CHECK(t.segment(4, 2) == tree.configs[1]);
  }
  SUBCASE("chain node uses its two predecessors") {
    Vec t = ancestor_tuple(tree, 4, 2);
    CHECK(t.segment(0, 2) == tree.configs[2]);
    CHECK(t.segment(2, 2) == tree.configs[3]);
    CHECK(t.segment(4, 2) == tree.configs[4]);
  }
  SUBCASE("first node of the second branch inherits the trunk history") {
    Vec t = ancestor_tuple(tree, 8, 2);
    CHECK(t.segment(0, 2) == tree.configs[3]);
    CHECK(t.segment(2, 2) == tree.configs[4]);
    CHECK(t.segment(4, 2) == tree.configs[8]);
  }
}

TEST_CASE("hessian sparsity on chains and branchings") {
  SUBCASE("chain is a band of half-width k") {
    TreeTopology chain = TreeTopology::chain(5);
    auto pairs = hessian_sparsity(chain, 2);
    for (int i = 0; i < 5; ++i)
      for (int j = i; j < 5; ++j) {
        const bool expected = j - i <= 2;
        const bool got = std::count(pairs.begin(), pairs.end(), std::make_pair(i, j)) > 0;
        CHECK(got == expected);
      }
  }
  SUBCASE("two-branch tree couples the trunk tail with both branch heads") {
    auto pairs = hessian_sparsity(two_branch_tree(), 2);
    auto has = [&](int i, int j) {
      if (i > j) std::swap(i, j);
      return std::count(pairs.begin(), pairs.end(), std::make_pair(i, j)) > 0;
    };
    // node 4 couples to 2..6 plus the head of the second branch
    for (int j : {2, 3, 5, 6, 8, 9}) CHECK(has(4, j));
    CHECK_FALSE(has(4, 7));
    CHECK_FALSE(has(4, 10));
    // the two branches never couple with each other
    for (int a : {5, 6, 7})
      for (int b : {8, 9, 10}) CHECK_FALSE(has(a, b));
  }
  SUBCASE("k=0 keeps only the diagonal") {
    auto pairs = hessian_sparsity(two_branch_tree(), 0);
    for (const auto& [i, j] : pairs) CHECK(i == j);
    CHECK(pairs.size() == 11);
  }
}

TEST_CASE("hessian sparsity matches brute-force enumeration on random trees") {
  std::mt19937 rng(89);
  for (int trial = 0; trial < 25; ++trial) {
    TreeTopology t = random_topology(rng, 25);
    for (int k : {1, 2, 3}) {
      auto fast = hessian_sparsity(t, k);
      auto brute = brute_force_pairs(t, k);
      std::sort(fast.begin(), fast.end());
      std::sort(brute.begin(), brute.end());
      CHECK(fast == brute);
    }
  }
}

TEST_CASE("transcription dimension and banded structure") {
  std::mt19937 rng(97);
  const int d = 1, k = 2;
  TreeTopology chain = TreeTopology::chain(5);
  std::vector<Vec> targets(5, Vec::Zero(d));
  TrajectoryTree tree = make_tree(chain, d, k, rng);
  NlpProblem nlp = tkomo_transcribe(tree, smooth_objective(d, k, targets));
  CHECK(nlp.dim == 5);
  REQUIRE(nlp.sparsity.has_value());
  // bandwidth (2k+1)*d: pairs only within |i-j| <= 2
  for (const auto& [i, j] : nlp.sparsity->pairs) CHECK(j - i <= 2);
}

TEST_CASE("single-node tree with quadratic cost solves exactly") {
  std::mt19937 rng(101);
  const int d = 3, k = 2;
  TreeTopology single = TreeTopology::chain(1);
  Vec target = oracle::random_matrix(rng, d, 1);
  TrajectoryTree tree = make_tree(single, d, k, rng);
  tree.prefix = {target, target};  // rest at the target
  NlpProblem nlp = tkomo_transcribe(tree, smooth_objective(d, k, {target}));
  SolverConfig cfg;
  cfg.eps_opt = 1e-12;
  SolveResult res = aula_solve(nlp, Vec::Zero(d), cfg);
  CHECK(res.status == SolveStatus::Converged);
  CHECK((res.z - target).norm() < 1e-9);
}

TEST_CASE("chain transcription equals the sequential k-order transcription") {
  // element-for-element: evaluating the tree cost on a chain matches a
  // hand-rolled sequential sum at random points
  std::mt19937 rng(103);
  const int d = 2, k = 2, N = 7;
  TreeTopology chain = TreeTopology::chain(N);
  std::vector<Vec> targets;
  for (int i = 0; i < N; ++i) targets.push_back(oracle::random_matrix(rng, d, 1));
  TrajectoryTree tree = make_tree(chain, d, k, rng);
  KOrderObjective obj = smooth_objective(d, k, targets);
  NlpProblem nlp = tkomo_transcribe(tree, obj);

  for (int trial = 0; trial < 5; ++trial) {
    Vec x = oracle::random_matrix(rng, N * d, 1);
    TrajectoryTree probe = tree;
    probe.set_from_stacked(x);
    double manual = 0.0;
    for (int i = 0; i < N; ++i) {
      Vec tuple = ancestor_tuple(probe, i, k);
      NodeObjective node_obj = obj.node(i);
      Vec r(node_obj.dim_cost);
      node_obj.cost_residuals(tuple, r, nullptr);
      manual += r.squaredNorm();
    }
    CHECK(nlp.cost(x, nullptr) == doctest::Approx(manual).epsilon(1e-12));
  }
}

TEST_CASE("finite-difference hessian vanishes outside the declared pattern") {
  std::mt19937 rng(107);
  for (int trial = 0; trial < 3; ++trial) {
    TreeTopology t = random_topology(rng, 10);
    const int d = 1, k = 2;
    std::vector<Vec> targets;
    for (int i = 0; i < t.node_count; ++i) targets.push_back(oracle::random_matrix(rng, d, 1));
    TrajectoryTree tree = make_tree(t, d, k, rng);
    NlpProblem nlp = tkomo_transcribe(tree, smooth_objective(d, k, targets));
    Vec x = oracle::random_matrix(rng, nlp.dim, 1);
    for (int i = 0; i < nlp.dim; ++i)
      for (int j = i; j < nlp.dim; ++j) {
        if (nlp.sparsity->contains(i, j)) continue;
        CHECK(std::abs(fd_hessian_entry(nlp.cost, x, i, j, 1e-3)) < 1e-8);
      }
  }
}

TEST_CASE("splitting schemes preserve the optimum on convex instances") {
  std::mt19937 rng(109);
  const int d = 2, k = 2;
  TreeTopology topo = two_branch_tree(0.3);
  std::vector<Vec> targets;
  for (int i = 0; i < topo.node_count; ++i) targets.push_back(oracle::random_matrix(rng, d, 1));
  TrajectoryTree tree = make_tree(topo, d, k, rng);
  KOrderObjective obj = smooth_objective(d, k, targets);

  NlpProblem joint = tkomo_transcribe(tree, obj);
  SolverConfig plain;
  plain.eps_opt = 1e-11;
  SolveResult joint_res = aula_solve(joint, Vec::Zero(joint.dim), plain);
  REQUIRE(joint_res.status == SolveStatus::Converged);
  const double joint_cost = joint.cost(joint_res.z, nullptr);

  for (SplitScheme scheme : {SplitScheme::Branches, SplitScheme::Subtrees}) {
    SplitResult split = split_to_structured(tree, obj, scheme);
    DaulaConfig cfg;
    cfg.inner.eps_opt = 1e-10;
    cfg.inner.eps_pri = 1e-9;
    cfg.xi_pri = 1e-8;
    cfg.xi_dual = 1e-9;
    cfg.max_outer = 500;
    DaulaResult res = daula_solve(split.structured, nullptr, cfg);
    REQUIRE(res.status == SolveStatus::Converged);
    double cost = 0.0;
    for (int m = 0; m < split.structured.num_subproblems(); ++m)
      cost += split.structured.subproblems[m].weight *
              split.structured.subproblems[m].nlp.cost(res.state.z[m], nullptr);
    CHECK(cost == doctest::Approx(joint_cost).epsilon(1e-5));
  }

  SUBCASE("qmdp split shapes") {
    BeliefState b = BeliefState::uniform(2);
    TreeTopology qmdp = build_qmdp_topology(2, 4, 6, b);
    std::vector<Vec> tg(qmdp.node_count, Vec::Zero(d));
    TrajectoryTree qt = make_tree(qmdp, d, k, rng);
    SplitResult split = split_to_structured(qt, smooth_objective(d, k, tg), SplitScheme::Branches);
    CHECK(split.structured.num_subproblems() == 2);
    CHECK(split.structured.shared.consensus_dim == 4 * d);
  }
  SUBCASE("chain split is the identity structure") {
    TreeTopology chain = TreeTopology::chain(6);
    std::vector<Vec> tg(6, Vec::Zero(d));
    TrajectoryTree ct = make_tree(chain, d, k, rng);
    SplitResult split = split_to_structured(ct, smooth_objective(d, k, tg), SplitScheme::Branches);
    CHECK(split.structured.num_subproblems() == 1);
    CHECK(split.structured.shared.consensus_dim == 0);
  }
}

TEST_CASE("tree text export round-trips") {
  std::mt19937 rng(113);
  TrajectoryTree tree = make_tree(two_branch_tree(0.25), 3, 2, rng);
  tree.prefix[0] = oracle::random_matrix(rng, 3, 1);
  tree.prefix[1] = oracle::random_matrix(rng, 3, 1);
  std::ostringstream os;
  save_tree(tree, os);
  std::string text = os.str();
  CHECK(text.rfind("#tree d=3 k=2 N=11", 0) == 0);

  std::istringstream is(text);
  TrajectoryTree back = load_tree(is);
  CHECK(back.topology.parent == tree.topology.parent);
  for (int i = 0; i < 11; ++i) CHECK((back.configs[i] - tree.configs[i]).norm() == 0.0);
  for (int i = 0; i < 2; ++i) CHECK((back.prefix[i] - tree.prefix[i]).norm() == 0.0);
}
