#include "treeopt/structured.hpp"

#include <cmath>
#include <numeric>
#include <set>

namespace treeopt {

SharedVariableMap SharedVariableMap::leading_block(int n_subproblems, int shared_dim) {
  SharedVariableMap map;
  map.consensus_dim = shared_dim;
  map.local_index.resize(n_subproblems);
  for (auto& list : map.local_index) {
    list.resize(shared_dim);
    std::iota(list.begin(), list.end(), 0);
  }
  return map;
}

void SharedVariableMap::validate(const std::vector<int>& subproblem_dims) const {
  if (local_index.size() != subproblem_dims.size())
    throw std::invalid_argument("shared map: one index list per subproblem required");
  std::vector<int> contributors(consensus_dim, 0);
  for (size_t m = 0; m < local_index.size(); ++m) {
    const auto& list = local_index[m];
    if (static_cast<int>(list.size()) != consensus_dim)
      throw std::invalid_argument("shared map: index lists must have consensus_dim entries");
    int prev = -1;
    for (int j = 0; j < consensus_dim; ++j) {
      const int idx = list[j];
      if (idx < 0) continue;
      if (idx >= subproblem_dims[m])
        throw std::invalid_argument("shared map: index out of range");
      if (idx <= prev)
        throw std::invalid_argument("shared map: indices must be strictly increasing");
      prev = idx;
      ++contributors[j];
    }
  }
  for (int j = 0; j < consensus_dim; ++j)
    if (contributors[j] == 0)
      throw std::invalid_argument("shared map: consensus entry without contributor");
}

Vec SharedVariableMap::gather(int m, const Vec& z, const Vec& fallback) const {
  Vec out = fallback;
  const auto& list = local_index[m];
  for (int j = 0; j < consensus_dim; ++j)
    if (list[j] >= 0) out[j] = z[list[j]];
  return out;
}

std::vector<int> StructuredProblem::dims() const {
  std::vector<int> d;
  d.reserve(subproblems.size());
  for (const Subproblem& s : subproblems) d.push_back(s.nlp.dim);
  return d;
}

void StructuredProblem::validate(bool require_normalized) const {
  if (subproblems.empty()) throw std::invalid_argument("structured problem needs >= 1 subproblem");
  double total = 0.0;
  for (const Subproblem& s : subproblems) {
    if (s.weight < 0.0) throw std::invalid_argument("subproblem weights must be nonnegative");
    total += s.weight;
  }
  if (total <= 0.0) throw std::invalid_argument("subproblem weights must have positive sum");
  if (require_normalized && std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("subproblem weights must sum to 1");
  shared.validate(dims());
}

namespace {

// Remaps a subproblem evaluator into global coordinates (row offset, column map).
VectorEvaluator remap_evaluator(VectorEvaluator inner, std::vector<int> col_map, int local_dim,
                                int out_dim, int global_dim) {
  return [inner = std::move(inner), col_map = std::move(col_map), local_dim, out_dim, global_dim](
             const Vec& x, Vec& value, SpMat* jac) {
    Vec local(local_dim);
    for (int i = 0; i < local_dim; ++i) local[i] = x[col_map[i]];
    if (!jac) {
      inner(local, value, nullptr);
      return;
    }
    SpMat J_local;
    inner(local, value, &J_local);
    std::vector<Triplet> triplets;
    triplets.reserve(J_local.nonZeros());
    for (int k = 0; k < J_local.outerSize(); ++k)
      for (SpMat::InnerIterator it(J_local, k); it; ++it)
        triplets.emplace_back(static_cast<int>(it.row()), col_map[it.col()], it.value());
    jac->resize(out_dim, global_dim);
    jac->setFromTriplets(triplets.begin(), triplets.end());
  };
}

struct CombinedPiece {
  const NlpProblem* nlp;
  double weight;
  std::vector<int> col_map;
};

NlpProblem combine(const std::vector<CombinedPiece>& pieces, int global_dim) {
  NlpProblem out;
  out.dim = global_dim;

  int total_g = 0, total_h = 0, total_r = 0;
  bool all_residual = true;
  bool all_sparsity = true;
  for (const CombinedPiece& p : pieces) {
    total_g += p.nlp->dim_ineq;
    total_h += p.nlp->dim_eq;
    total_r += p.nlp->dim_residual;
    all_residual = all_residual && p.nlp->has_residual_form();
    all_sparsity = all_sparsity && p.nlp->sparsity.has_value();
  }
  out.dim_ineq = total_g;
  out.dim_eq = total_h;

  struct Stacked {
    std::vector<VectorEvaluator> evals;
    std::vector<int> row_offsets;
    std::vector<int> dims;
    int total = 0;
  };
  auto stack = [&](auto select_eval, auto select_dim, const std::vector<double>* scales) {
    Stacked s;
    int offset = 0;
    for (size_t i = 0; i < pieces.size(); ++i) {
      const CombinedPiece& p = pieces[i];
      const int d = select_dim(*p.nlp);
      if (d == 0) continue;
      VectorEvaluator base = select_eval(*p.nlp);
      if (scales) {
        const double scale = (*scales)[i];
        base = [base, scale, d](const Vec& z, Vec& value, SpMat* jac) {
          base(z, value, jac);
          value *= scale;
          if (jac) *jac = scale * (*jac);
        };
      }
      s.evals.push_back(remap_evaluator(std::move(base), p.col_map,
                                        static_cast<int>(p.col_map.size()), d, global_dim));
      s.row_offsets.push_back(offset);
      s.dims.push_back(d);
      offset += d;
    }
    s.total = offset;
    return s;
  };
  auto make_concat = [global_dim](Stacked s) -> VectorEvaluator {
    return [s = std::move(s), global_dim](const Vec& x, Vec& value, SpMat* jac) {
      value.resize(s.total);
      std::vector<Triplet> triplets;
      for (size_t i = 0; i < s.evals.size(); ++i) {
        Vec v(s.dims[i]);
        if (jac) {
          SpMat J;
          s.evals[i](x, v, &J);
          for (int k = 0; k < J.outerSize(); ++k)
            for (SpMat::InnerIterator it(J, k); it; ++it)
              triplets.emplace_back(s.row_offsets[i] + static_cast<int>(it.row()),
                                    static_cast<int>(it.col()), it.value());
        } else {
          s.evals[i](x, v, nullptr);
        }
        value.segment(s.row_offsets[i], s.dims[i]) = v;
      }
      if (jac) {
        jac->resize(s.total, global_dim);
        jac->setFromTriplets(triplets.begin(), triplets.end());
      }
    };
  };

  if (total_g > 0)
    out.ineq = make_concat(stack([](const NlpProblem& p) { return p.ineq; },
                                 [](const NlpProblem& p) { return p.dim_ineq; }, nullptr));
  if (total_h > 0)
    out.eq = make_concat(stack([](const NlpProblem& p) { return p.eq; },
                               [](const NlpProblem& p) { return p.dim_eq; }, nullptr));

  // cost = sum_i w_i c_i(x[map_i])
  {
    struct CostPiece {
      ScalarEvaluator cost;
      double weight;
      std::vector<int> col_map;
    };
    std::vector<CostPiece> costs;
    for (const CombinedPiece& p : pieces) costs.push_back({p.nlp->cost, p.weight, p.col_map});
    out.cost = [costs, global_dim](const Vec& x, Vec* grad) {
      double value = 0.0;
      if (grad) grad->setZero(global_dim);
      for (const CostPiece& c : costs) {
        Vec local(c.col_map.size());
        for (size_t i = 0; i < c.col_map.size(); ++i) local[i] = x[c.col_map[i]];
        if (grad) {
          Vec g;
          value += c.weight * c.cost(local, &g);
          for (size_t i = 0; i < c.col_map.size(); ++i) (*grad)[c.col_map[i]] += c.weight * g[i];
        } else {
          value += c.weight * c.cost(local, nullptr);
        }
      }
      return value;
    };
  }

  if (all_residual && total_r > 0) {
    // stacked sqrt(w_i) r_i keeps cost == |r|^2
    std::vector<double> scales;
    for (const CombinedPiece& p : pieces) scales.push_back(std::sqrt(p.weight));
    out.residual_form =
        make_concat(stack([](const NlpProblem& p) { return p.residual_form; },
                          [](const NlpProblem& p) { return p.dim_residual; }, &scales));
    out.dim_residual = total_r;
  }

  if (all_sparsity) {
    std::set<std::pair<int, int>> pairs;
    for (const CombinedPiece& p : pieces) {
      for (const auto& [i, j] : p.nlp->sparsity->pairs) {
        int a = p.col_map[i], b = p.col_map[j];
        if (a > b) std::swap(a, b);
        pairs.insert({a, b});
      }
    }
    CouplingPattern pattern;
    pattern.dim = global_dim;
    pattern.pairs.assign(pairs.begin(), pairs.end());
    out.sparsity = std::move(pattern);
  }
  return out;
}

}  // namespace

FlattenedProblem joint_flatten(const StructuredProblem& problem) {
  problem.validate(false);
  const int N = problem.num_subproblems();
  const SharedVariableMap& shared = problem.shared;

  // Consensus entries that actually have a contributor come first.
  std::vector<int> consensus_global(shared.consensus_dim, -1);
  int global_dim = 0;
  for (int j = 0; j < shared.consensus_dim; ++j) consensus_global[j] = global_dim++;

  FlattenedProblem flat;
  flat.shared_dim = shared.consensus_dim;
  flat.var_map.resize(N);
  for (int m = 0; m < N; ++m) {
    const NlpProblem& nlp = problem.subproblems[m].nlp;
    std::vector<int>& map = flat.var_map[m];
    map.assign(nlp.dim, -1);
    for (int j = 0; j < shared.consensus_dim; ++j) {
      const int local = shared.local_index[m][j];
      if (local >= 0) map[local] = consensus_global[j];
    }
    for (int i = 0; i < nlp.dim; ++i)
      if (map[i] < 0) map[i] = global_dim++;
  }

  std::vector<CombinedPiece> pieces;
  for (int m = 0; m < N; ++m)
    pieces.push_back(
        {&problem.subproblems[m].nlp, problem.subproblems[m].weight, flat.var_map[m]});
  flat.nlp = combine(pieces, global_dim);
  return flat;
}

Vec FlattenedProblem::gather_subproblem(int m, const Vec& x) const {
  const auto& map = var_map[m];
  Vec z(map.size());
  for (size_t i = 0; i < map.size(); ++i) z[i] = x[map[i]];
  return z;
}

StackedProblem stack_subproblems(const StructuredProblem& problem) {
  problem.validate(false);
  StackedProblem stacked;
  int offset = 0;
  std::vector<CombinedPiece> pieces;
  for (const Subproblem& s : problem.subproblems) {
    stacked.offsets.push_back(offset);
    std::vector<int> map(s.nlp.dim);
    std::iota(map.begin(), map.end(), offset);
    offset += s.nlp.dim;
    pieces.push_back({&s.nlp, s.weight, std::move(map)});
  }
  stacked.nlp = combine(pieces, offset);
  return stacked;
}

}  // namespace treeopt
