#include "treeopt/belief.hpp"

#include <cmath>
#include <set>

namespace treeopt {

void BeliefState::validate() const {
  if (hypotheses.empty()) throw std::invalid_argument("belief needs at least one hypothesis");
  if (probs.size() != size()) throw std::invalid_argument("belief probs size mismatch");
  std::set<int> ids;
  for (const Hypothesis& h : hypotheses)
    if (!ids.insert(h.id).second) throw std::invalid_argument("duplicate hypothesis id");
  if (probs.minCoeff() < 0.0) throw std::invalid_argument("belief probs must be nonnegative");
  if (std::abs(probs.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("belief probs must sum to 1");
}

double BeliefState::entropy() const {
  double H = 0.0;
  for (int m = 0; m < probs.size(); ++m)
    if (probs[m] > 0.0) H -= probs[m] * std::log(probs[m]);
  return H;
}

BeliefState BeliefState::uniform(int n_hypotheses) {
  BeliefState b;
  b.hypotheses.resize(n_hypotheses);
  for (int m = 0; m < n_hypotheses; ++m) b.hypotheses[m].id = m;
  b.probs = Vec::Constant(n_hypotheses, 1.0 / n_hypotheses);
  return b;
}

BeliefState belief_posterior(const BeliefState& belief, const std::vector<double>& likelihood) {
  if (static_cast<int>(likelihood.size()) != belief.size())
    throw std::invalid_argument("likelihood size mismatch");
  BeliefState out = belief;
  double total = 0.0;
  for (int m = 0; m < belief.size(); ++m) {
    out.probs[m] = likelihood[m] * belief.probs[m];
    total += out.probs[m];
  }
  if (total <= 0.0) throw InconsistentObservation();
  out.probs /= total;
  return out;
}

}  // namespace treeopt
