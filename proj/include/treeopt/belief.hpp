#pragma once

#include "treeopt/nlp.hpp"

namespace treeopt {

struct InconsistentObservation : std::runtime_error {
  InconsistentObservation() : std::runtime_error("observation inconsistent with every live hypothesis") {}
};

/// One candidate assignment of the latent state components. The symbolic
/// payload is an opaque handle owned by the domain.
struct Hypothesis {
  int id = 0;
  int symbolic = 0;
  Vec latent_continuous;  // optional, may be empty
};

/// Observable payload plus a probability distribution over a fixed set of
/// hypotheses.
struct BeliefState {
  int observable = 0;
  std::vector<Hypothesis> hypotheses;
  Vec probs;

  int size() const { return static_cast<int>(hypotheses.size()); }
  void validate() const;
  double entropy() const;

  static BeliefState uniform(int n_hypotheses);
};

/// Bayes posterior for a deterministic observation model: likelihoods are
/// 0/1 per hypothesis, b'(m) ~ likelihood(m) b(m). The hypothesis index set
/// stays fixed; ruled-out hypotheses keep probability zero. Throws
/// InconsistentObservation when no live hypothesis supports the observation.
BeliefState belief_posterior(const BeliefState& belief, const std::vector<double>& likelihood);

}  // namespace treeopt
