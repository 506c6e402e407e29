#include "treeopt/pedestrian.hpp"

#include <cmath>

namespace treeopt {

void PedestrianParams::validate() const {
  if (dt <= 0) throw std::invalid_argument("dt must be positive");
  if (L < 1 || T <= L) throw std::invalid_argument("need 0 < L < T");
  if (u_min >= u_max) throw std::invalid_argument("u_min must be below u_max");
  if (k_v < 0 || k_u < 0) throw std::invalid_argument("weights must be nonnegative");
}

void PedestrianScene::validate() const {
  double prev = ego_x;
  for (const PedestrianAhead& p : pedestrians) {
    if (p.x <= prev) throw std::invalid_argument("pedestrians must be strictly ahead, ordered");
    if (p.p_cross < 0.0 || p.p_cross > 1.0)
      throw std::invalid_argument("crossing probabilities must be in [0,1]");
    prev = p.x;
  }
}

Vec crossing_hypothesis_probs(const std::vector<double>& p_cross) {
  const int n = static_cast<int>(p_cross.size());
  Vec probs(n + 1);
  double q = 1.0;  // probability that none of the first m pedestrians crosses
  for (int m = 0; m < n; ++m) {
    const double q_next = q * (1.0 - p_cross[m]);
    probs[m] = q - q_next;
    q = q_next;
  }
  probs[n] = q;
  return probs;
}

void rollout(const PedestrianParams& params, double x0, double v0, const Vec& u, Vec& x, Vec& v) {
  const int T = static_cast<int>(u.size());
  x.resize(T);
  v.resize(T);
  double xt = x0, vt = v0;
  for (int t = 0; t < T; ++t) {
    xt += params.dt * vt;
    vt += params.dt * u[t];
    x[t] = xt;
    v[t] = vt;
  }
}

StructuredProblem build_pedestrian_problem(const PedestrianScene& scene,
                                           const PedestrianParams& params,
                                           const std::vector<PedestrianHypothesis>& hypotheses) {
  params.validate();
  scene.validate();
  if (hypotheses.empty()) throw std::invalid_argument("need at least one hypothesis");

  const int T = params.T;
  // v_t = v0 + dt sum_{tau < t} u_tau,  x_t = x0 + t dt v0 + dt^2 (t-1-tau) u_tau
  Mat Mv = Mat::Zero(T, T), Mx = Mat::Zero(T, T);
  for (int t = 1; t <= T; ++t)
    for (int tau = 0; tau < t; ++tau) {
      Mv(t - 1, tau) = params.dt;
      Mx(t - 1, tau) = params.dt * params.dt * static_cast<double>(t - 1 - tau);
    }
  Vec v_free(T), x_free(T);
  for (int t = 1; t <= T; ++t) {
    v_free[t - 1] = scene.ego_v;
    x_free[t - 1] = scene.ego_x + t * params.dt * scene.ego_v;
  }

  const double sqrt_kv = std::sqrt(params.k_v), sqrt_ku = std::sqrt(params.k_u);
  StructuredProblem out;
  out.shared = SharedVariableMap::leading_block(static_cast<int>(hypotheses.size()), params.L);

  for (const PedestrianHypothesis& hyp : hypotheses) {
    double stop_line = 0.0;
    if (hyp.stop_index >= 0) {
      if (hyp.stop_index >= static_cast<int>(scene.pedestrians.size()))
        throw std::invalid_argument("stop index out of range");
      stop_line = scene.pedestrians[hyp.stop_index].x - params.d_safety;
      if (scene.ego_x > stop_line)
        throw InfeasibleSpec("stop constraint already violated at t = 0");
    }

    NlpProblem nlp = NlpProblem::from_residuals(
        T, 2 * T,
        [Mv, v_free, sqrt_kv, sqrt_ku, v_des = params.v_des, T](const Vec& u, Vec& r, SpMat* J) {
          r.resize(2 * T);
          r.head(T) = sqrt_kv * (v_free + Mv * u - Vec::Constant(T, v_des));
          r.tail(T) = sqrt_ku * u;
          if (J) {
            Mat Jd(2 * T, T);
            Jd.topRows(T) = sqrt_kv * Mv;
            Jd.bottomRows(T) = sqrt_ku * Mat::Identity(T, T);
            *J = Jd.sparseView();
          }
        });

    const bool has_stop = hyp.stop_index >= 0;
    nlp.dim_ineq = 2 * T + (has_stop ? T : 0);
    nlp.ineq = [Mx, x_free, stop_line, has_stop, u_min = params.u_min, u_max = params.u_max,
                T](const Vec& u, Vec& g, SpMat* J) {
      const int rows = 2 * T + (has_stop ? T : 0);
      g.resize(rows);
      g.head(T) = u - Vec::Constant(T, u_max);
      g.segment(T, T) = Vec::Constant(T, u_min) - u;
      if (has_stop) g.tail(T) = x_free + Mx * u - Vec::Constant(T, stop_line);
      if (J) {
        Mat Jd = Mat::Zero(rows, T);
        Jd.topRows(T) = Mat::Identity(T, T);
        Jd.block(T, 0, T, T) = -Mat::Identity(T, T);
        if (has_stop) Jd.bottomRows(T) = Mx;
        *J = Jd.sparseView();
      }
    };
    out.subproblems.push_back({std::move(nlp), hyp.prob});
  }
  return out;
}

}  // namespace treeopt
