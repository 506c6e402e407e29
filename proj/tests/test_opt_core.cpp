#include "doctest.h"

#include "treeopt/aula.hpp"
#include "treeopt/gauss_newton.hpp"
#include "treeopt/nlp.hpp"

#include "oracles.hpp"

#include <random>
#include <sstream>

using namespace treeopt;

namespace {

SolverConfig tight_config() {
  SolverConfig cfg;
  cfg.eps_opt = 1e-10;
  cfg.eps_pri = 1e-8;
  cfg.max_outer = 200;
  return cfg;
}

}  // namespace

TEST_CASE("finite differences recover a linear map") {
  std::mt19937 rng(7);
  Mat A = 0.5 * oracle::random_matrix(rng, 5, 4);
  VectorEvaluator f = [A](const Vec& z, Vec& v, SpMat* J) {
    v = A * z;
    if (J) *J = A.sparseView();
  };
  Vec z = 0.5 * oracle::random_matrix(rng, 4, 1);
  Mat J = finite_difference_jacobian(f, 5, z, 1e-6);
  CHECK((J - A).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("finite differences on a scalar square") {
  ScalarEvaluator f = [](const Vec& z, Vec*) { return z[0] * z[0]; };
  Vec z(1);
  z << 3.0;
  Vec g = finite_difference_gradient(f, z, 1e-5);
  CHECK(g[0] == doctest::Approx(6.0).epsilon(1e-8));
}

TEST_CASE("finite differences reject non-finite evaluations") {
  VectorEvaluator f = [](const Vec& z, Vec& v, SpMat*) {
    v.resize(1);
    v[0] = std::sqrt(z[0]);  // NaN for z < 0
  };
  Vec z(1);
  z << 1e-9;
  CHECK_THROWS_AS(finite_difference_jacobian(f, 1, z, 1e-6), NumericalError);
}

TEST_CASE("gauss-newton solves an exact quadratic in one step") {
  std::mt19937 rng(3);
  Vec c = oracle::random_matrix(rng, 6, 1);
  NlpProblem p = NlpProblem::from_residuals(6, 6, [c](const Vec& z, Vec& r, SpMat* J) {
    r = z - c;
    if (J) {
      J->resize(6, 6);
      J->setIdentity();
    }
  });
  Vec z0 = oracle::random_matrix(rng, 6, 1);
  GnResult res = gauss_newton_minimize(p, z0, tight_config());
  CHECK(res.status == SolveStatus::Converged);
  CHECK(res.iters <= 2);
  CHECK((res.z - c).norm() < 1e-12);
}

TEST_CASE("gauss-newton matches the normal-equation solution") {
  std::mt19937 rng(11);
  Mat A = oracle::random_matrix(rng, 10, 6);
  Vec b = oracle::random_matrix(rng, 10, 1);
  NlpProblem p = NlpProblem::from_residuals(6, 10, [A, b](const Vec& z, Vec& r, SpMat* J) {
    r = A * z - b;
    if (J) *J = A.sparseView();
  });
  Vec expected = (A.transpose() * A).ldlt().solve(A.transpose() * b);
  GnResult res = gauss_newton_minimize(p, Vec::Zero(6), tight_config());
  CHECK(res.status == SolveStatus::Converged);
  CHECK((res.z - expected).norm() < 1e-8);
}

TEST_CASE("gauss-newton finds the nearest stationary basin of (z^2-1)^2") {
  NlpProblem p = NlpProblem::from_residuals(1, 1, [](const Vec& z, Vec& r, SpMat* J) {
    r.resize(1);
    r[0] = z[0] * z[0] - 1.0;
    if (J) {
      J->resize(1, 1);
      J->coeffRef(0, 0) = 2.0 * z[0];
    }
  });
  Vec z0(1);
  z0 << 0.1;
  GnResult res = gauss_newton_minimize(p, z0, tight_config());
  CHECK(res.status == SolveStatus::Converged);
  CHECK(res.z[0] == doctest::Approx(1.0).epsilon(1e-6));
}

namespace {

// Records the objective at every gradient evaluation; gn_minimize requests
// the gradient exactly at accepted iterates.
class RecordingObjective : public GnObjective {
 public:
  explicit RecordingObjective(const GnObjective& inner) : inner_(&inner) {}
  int dim() const override { return inner_->dim(); }
  double eval(const Vec& z, Vec* grad) const override {
    double f = inner_->eval(z, grad);
    if (grad) accepted_costs.push_back(f);
    return f;
  }
  void curvature(const Vec& z, std::vector<Triplet>& t) const override {
    inner_->curvature(z, t);
  }
  mutable std::vector<double> accepted_costs;

 private:
  const GnObjective* inner_;
};

}  // namespace

TEST_CASE("accepted gauss-newton steps never increase the objective") {
  std::mt19937 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 4;
    Mat A = oracle::random_matrix(rng, n + 1, n);
    Vec b = oracle::random_matrix(rng, n + 1, 1);
    // nonconvex residuals: affine part plus elementwise cubes
    VectorEvaluator residuals = [A, b, n](const Vec& z, Vec& r, SpMat* J) {
      r = A * z - b;
      for (int i = 0; i < n; ++i) r[i] += 0.1 * z[i] * z[i] * z[i];
      if (J) {
        Mat Jd = A;
        for (int i = 0; i < n; ++i) Jd(i, i) += 0.3 * z[i] * z[i];
        *J = Jd.sparseView();
      }
    };
    LeastSquaresObjective obj(n, n + 1, residuals);
    RecordingObjective rec(obj);
    gn_minimize(rec, oracle::random_matrix(rng, n, 1), tight_config());
    for (size_t i = 1; i < rec.accepted_costs.size(); ++i)
      CHECK(rec.accepted_costs[i] <= rec.accepted_costs[i - 1] + 1e-12);
  }
}

namespace {

NlpProblem one_d_bound_problem() {
  // min z^2  s.t.  z >= 1, written as g = 1 - z <= 0
  NlpProblem p = NlpProblem::from_residuals(1, 1, [](const Vec& z, Vec& r, SpMat* J) {
    r.resize(1);
    r[0] = z[0];
    if (J) {
      J->resize(1, 1);
      J->coeffRef(0, 0) = 1.0;
    }
  });
  p.dim_ineq = 1;
  p.ineq = [](const Vec& z, Vec& g, SpMat* J) {
    g.resize(1);
    g[0] = 1.0 - z[0];
    if (J) {
      J->resize(1, 1);
      J->coeffRef(0, 0) = -1.0;
    }
  };
  return p;
}

}  // namespace

TEST_CASE("aula solves the analytic bound-constrained problem") {
  NlpProblem p = one_d_bound_problem();
  SolverConfig cfg;
  cfg.eps_pri = 1e-8;
  cfg.eps_opt = 1e-8;
  cfg.max_outer = 200;
  SolveResult res = aula_solve(p, Vec::Zero(1), cfg);
  CHECK(res.status == SolveStatus::Converged);
  CHECK(res.z[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(res.lambda[0] == doctest::Approx(2.0).epsilon(1e-4));
}

TEST_CASE("aula on an unconstrained problem routes to the inner minimizer") {
  std::mt19937 rng(5);
  Mat A = oracle::random_matrix(rng, 8, 5);
  Vec b = oracle::random_matrix(rng, 8, 1);
  NlpProblem p = NlpProblem::from_residuals(5, 8, [A, b](const Vec& z, Vec& r, SpMat* J) {
    r = A * z - b;
    if (J) *J = A.sparseView();
  });
  SolverConfig cfg = tight_config();
  SolveResult res = aula_solve(p, Vec::Zero(5), cfg);
  GnResult gn = gauss_newton_minimize(p, Vec::Zero(5), cfg);
  CHECK(res.status == SolveStatus::Converged);
  CHECK(res.lambda.size() == 0);
  CHECK(res.kappa.size() == 0);
  CHECK((res.z - gn.z).norm() == 0.0);
}

TEST_CASE("aula matches the dense KKT oracle on equality QPs") {
  std::mt19937 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    oracle::QpSpec spec;
    spec.n_subproblems = 1;
    spec.shared_dim = 0;
    spec.extra_min = 20;
    spec.extra_max = 20;
    spec.eq_rows_min = 5;
    spec.eq_rows_max = 5;
    oracle::RandomQp qp = oracle::make_random_qp(rng, spec);
    oracle::FlatQpData flat = oracle::flatten_qp(qp);
    oracle::KktSolution kkt =
        oracle::solve_equality_kkt(flat.H, flat.q, flat.A_eq, flat.b_eq, flat.constant);

    SolverConfig cfg;
    cfg.eps_pri = 1e-9;
    cfg.eps_opt = 1e-9;
    cfg.max_outer = 400;
    cfg.penalty_growth = true;
    SolveResult res = aula_solve(qp.problem.subproblems[0].nlp, Vec::Zero(flat.dim), cfg);
    CHECK(res.status == SolveStatus::Converged);
    const double cost = qp.problem.subproblems[0].nlp.cost(res.z, nullptr);
    CHECK(std::abs(cost - kkt.objective) / std::max(1.0, std::abs(kkt.objective)) < 1e-5);
  }
}

TEST_CASE("inequality multipliers stay nonnegative across outer iterations") {
  std::mt19937 rng(17);
  oracle::QpSpec spec;
  spec.shared_dim = 0;
  spec.extra_min = 6;
  spec.extra_max = 8;
  spec.eq_rows_max = 2;
  spec.ineq_rows_max = 4;
  for (int trial = 0; trial < 10; ++trial) {
    oracle::RandomQp qp = oracle::make_random_qp(rng, spec);
    SolverConfig cfg;
    cfg.max_outer = 60;
    SolveResult res = aula_solve(qp.problem.subproblems[0].nlp, Vec::Zero(qp.A[0].cols()), cfg);
    if (res.lambda.size() > 0) CHECK(res.lambda.minCoeff() >= 0.0);
  }
}

TEST_CASE("check_kkt accepts the analytic point and rejects a perturbation") {
  NlpProblem p = one_d_bound_problem();
  SolveResult at_opt;
  at_opt.z = Vec::Ones(1);
  at_opt.lambda = Vec::Constant(1, 2.0);
  at_opt.kappa = Vec(0);
  KktReport ok = check_kkt(p, at_opt, 1e-10);
  CHECK(ok.pass);
  for (const KktCondition& c : ok.conditions) CHECK(c.residual <= 1e-10);

  SolveResult off = at_opt;
  off.z[0] += 0.1;
  KktReport bad = check_kkt(p, off, 1e-6);
  CHECK_FALSE(bad.pass);
  CHECK(bad.residual("stationarity") > 1e-6);
}

TEST_CASE("check_kkt passes on a converged random QP") {
  std::mt19937 rng(23);
  oracle::QpSpec spec;
  spec.shared_dim = 0;
  spec.extra_min = 6;
  spec.extra_max = 6;
  spec.eq_rows_max = 2;
  spec.ineq_rows_max = 3;
  oracle::RandomQp qp = oracle::make_random_qp(rng, spec);
  SolverConfig cfg;
  cfg.eps_pri = 1e-7;
  cfg.eps_opt = 1e-8;
  cfg.max_outer = 300;
  cfg.penalty_growth = true;
  SolveResult res = aula_solve(qp.problem.subproblems[0].nlp, Vec::Zero(qp.A[0].cols()), cfg);
  REQUIRE(res.status == SolveStatus::Converged);
  KktReport report = check_kkt(qp.problem.subproblems[0].nlp, res, 1e-4);
  CHECK(report.pass);
}

TEST_CASE("complementary slackness holds at inactive constraints") {
  NlpProblem p = one_d_bound_problem();
  // shift the bound so it is inactive: g = -1 - z <= 0, optimum z = 0
  p.ineq = [](const Vec& z, Vec& g, SpMat* J) {
    g.resize(1);
    g[0] = -1.0 - z[0];
    if (J) {
      J->resize(1, 1);
      J->coeffRef(0, 0) = -1.0;
    }
  };
  SolverConfig cfg;
  SolveResult res = aula_solve(p, Vec::Zero(1), cfg);
  CHECK(res.status == SolveStatus::Converged);
  CHECK(res.lambda[0] <= cfg.eps_pri);
}

TEST_CASE("history csv has the documented columns") {
  NlpProblem p = one_d_bound_problem();
  SolveResult res = aula_solve(p, Vec::Zero(1), SolverConfig{});
  std::ostringstream os;
  write_history_csv(res.history, os);
  std::string line;
  std::istringstream is(os.str());
  std::getline(is, line);
  CHECK(line == "iter,cost,viol_g,viol_h,step_norm");
  std::getline(is, line);
  CHECK(std::count(line.begin(), line.end(), ',') == 4);
}
