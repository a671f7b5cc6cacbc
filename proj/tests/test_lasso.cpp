#include <doctest.h>

#include <random>

#include "debiased/lasso.hpp"
#include "oracles.hpp"

using namespace debiased;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

namespace {

PenalizedQuadraticProblem<double> make(const MatrixXd& s, const VectorXd& m, double r) {
  return {s, m, r};
}

}  // namespace

TEST_CASE("soft_threshold") {
  CHECK(soft_threshold(1.0, 0.5) == doctest::Approx(0.5));
  CHECK(soft_threshold(-0.3, 0.5) == 0.0);
  CHECK(soft_threshold(-1.2, 0.5) == doctest::Approx(-0.7));
  CHECK(soft_threshold(0.5, 0.5) == 0.0);
}

TEST_CASE("objective") {
  CHECK(objective(make(MatrixXd::Identity(2, 2), Vector2d(0, 0), 1.0), VectorXd(Vector2d(1, 1))) ==
        doctest::Approx(6.0));
  CHECK(objective(make(2 * MatrixXd::Identity(2, 2), Vector2d(1, 1), 0.0), VectorXd(Vector2d(0.5, 0.5))) ==
        doctest::Approx(-1.0));
  const auto rp = oracle::random_problem(4, 12, 3);
  CHECK(objective(make(rp.sigma, rp.target, 0.2), VectorXd(VectorXd::Zero(4))) == 0.0);
}

TEST_CASE("solve on small problems") {
  SUBCASE("identity gram decouples") {
    const auto sol = solve(make(MatrixXd::Identity(2, 2), Vector2d(1.0, 0.2), 0.5));
    CHECK(sol.converged);
    CHECK(sol.coeffs(0) == doctest::Approx(0.5));
    CHECK(sol.coeffs(1) == 0.0);
  }
  SUBCASE("unpenalized identity") {
    const auto sol = solve(make(MatrixXd::Identity(2, 2), Vector2d(0.7, -0.3), 0.0));
    CHECK(sol.coeffs(0) == doctest::Approx(0.7));
    CHECK(sol.coeffs(1) == doctest::Approx(-0.3));
  }
  SUBCASE("correlated pair") {
    MatrixXd s(2, 2);
    s << 1, 0.5, 0.5, 1;
    const VectorXd m = Vector2d(1, 0);
    const auto sol = solve(make(s, m, 0.1));
    const auto ref = oracle::brute_force_lasso(s, m, 0.1);
    CHECK(sol.objective == doctest::Approx(ref.objective).epsilon(1e-10));
    CHECK((sol.coeffs - ref.coeffs).cwiseAbs().maxCoeff() < 1e-8);
    // frozen from the enumeration: (17/15, -7/15), objective -73/75
    CHECK(sol.coeffs(0) == doctest::Approx(17.0 / 15.0).epsilon(1e-9));
    CHECK(sol.coeffs(1) == doctest::Approx(-7.0 / 15.0).epsilon(1e-9));
    CHECK(sol.objective == doctest::Approx(-73.0 / 75.0).epsilon(1e-12));
    CHECK(sol.active_set == std::vector<Eigen::Index>{0, 1});
  }
}

TEST_CASE("kkt_check") {
  const auto problem = make(MatrixXd::Identity(2, 2), Vector2d(1, 0.2), 0.5);
  const auto ok = kkt_check(problem, VectorXd(Vector2d(0.5, 0)), 1e-12);
  CHECK(ok.passed);
  CHECK(ok.max_violation == 0.0);
  const auto bad = kkt_check(problem, VectorXd(Vector2d(1, 0)), 1e-8);
  CHECK_FALSE(bad.passed);
  CHECK(bad.max_violation == doctest::Approx(0.5));
  CHECK_THROWS_AS(kkt_check(problem, VectorXd(VectorXd::Zero(3)), 1e-8), Error);
}

TEST_CASE("validation errors") {
  MatrixXd s(2, 2);
  s << 1, 0.3, 0.2, 1;
  try {
    (void)solve(make(s, Vector2d(1, 1), 0.1));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidArgs);
  }
  try {
    (void)solve(make(MatrixXd::Identity(3, 3), Vector2d(1, 1), 0.1));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DimensionMismatch);
  }
  CHECK_THROWS_AS((void)solve(make(MatrixXd::Identity(2, 2), Vector2d(1, 1), -0.1)), Error);
}

TEST_CASE("zero diagonal coordinate stays at zero") {
  MatrixXd s = MatrixXd::Zero(3, 3);
  s(0, 0) = 1;
  s(2, 2) = 2;
  const auto sol = solve(make(s, Eigen::Vector3d(1, 5, 1), 0.1));
  CHECK(sol.converged);
  CHECK(sol.coeffs(1) == 0.0);
  CHECK(sol.coeffs(0) == doctest::Approx(0.9));
  CHECK(sol.coeffs(2) == doctest::Approx(0.45));
}

TEST_CASE("agrees with enumeration on random problems") {
  for (unsigned seed = 0; seed < 60; ++seed) {
    const int p = 2 + static_cast<int>(seed % 5);
    const auto rp = oracle::random_problem(p, 3 * p, 1000 + seed);
    for (double r : {0.0, 0.05, 0.3}) {
      const auto problem = make(rp.sigma, rp.target, r);
      const auto sol = solve(problem);
      const auto ref = oracle::brute_force_lasso(rp.sigma, rp.target, r);
      CHECK(sol.converged);
      CHECK(sol.objective - ref.objective <= 1e-8);
      CHECK(kkt_check(problem, sol.coeffs, 1e-6).passed);
    }
  }
}

TEST_CASE("objective never increases across sweeps") {
  for (unsigned seed = 0; seed < 20; ++seed) {
    const auto rp = oracle::random_problem(8, 10, 77 + seed);
    SolveOptions<double> opts;
    opts.record_trace = true;
    const auto sol = solve(make(rp.sigma, rp.target, 0.05), opts);
    REQUIRE(sol.trace.size() == sol.iterations);
    for (std::size_t k = 1; k < sol.trace.size(); ++k) CHECK(sol.trace[k] <= sol.trace[k - 1] + 1e-12);
  }
}

TEST_CASE("larger penalty shrinks the l1 norm on an identity gram") {
  std::mt19937 gen(5);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    VectorXd m(6);
    for (int j = 0; j < 6; ++j) m(j) = normal(gen);
    double previous = std::numeric_limits<double>::infinity();
    for (double r : {0.0, 0.1, 0.2, 0.5, 1.0, 2.0}) {
      const double norm = solve(make(MatrixXd::Identity(6, 6), m, r)).coeffs.lpNorm<1>();
      CHECK(norm <= previous + 1e-8);
      previous = norm;
    }
  }
}

TEST_CASE("scaling sigma, target and penalty together leaves coefficients unchanged") {
  for (unsigned seed = 0; seed < 10; ++seed) {
    const auto rp = oracle::random_problem(5, 15, 300 + seed);
    const auto base = solve(make(rp.sigma, rp.target, 0.1));
    for (double c : {0.25, 3.0, 40.0}) {
      const auto scaled = solve(make(c * rp.sigma, c * rp.target, c * 0.1));
      CHECK((scaled.coeffs - base.coeffs).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("gram form matches the explicit matrix") {
  std::mt19937 gen(11);
  std::normal_distribution<double> normal;
  const int n = 30, p = 12;
  MatrixXd d(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) d(i, j) = normal(gen);
  VectorXd m(p);
  for (int j = 0; j < p; ++j) m(j) = 0.5 * normal(gen);
  const MatrixXd s = d.transpose() * d / n;
  const auto dense = solve(make(s, m, 0.1));
  const auto gram = solve(GramPenalizedProblem<double>{d, m, 0.1});
  CHECK(gram.converged);
  CHECK((dense.coeffs - gram.coeffs).cwiseAbs().maxCoeff() < 1e-7);
  CHECK(gram.objective == doctest::Approx(dense.objective).epsilon(1e-10));
  CHECK(objective(GramPenalizedProblem<double>{d, m, 0.1}, gram.coeffs) ==
        doctest::Approx(objective(make(s, m, 0.1), gram.coeffs)).epsilon(1e-12));
}

TEST_CASE("warm start and iteration cap") {
  const auto rp = oracle::random_problem(6, 18, 9);
  const auto problem = make(rp.sigma, rp.target, 0.05);
  const auto cold = solve(problem);
  SolveOptions<double> warm;
  warm.init = cold.coeffs;
  const auto hot = solve(problem, warm);
  CHECK(hot.iterations == 1);
  CHECK((hot.coeffs - cold.coeffs).cwiseAbs().maxCoeff() < 1e-8);

  SolveOptions<double> capped;
  capped.max_iter = 1;
  capped.tol = 1e-15;
  const auto stopped = solve(problem, capped);
  CHECK(stopped.iterations == 1);
  CHECK_FALSE(stopped.converged);
  CHECK(stopped.kkt_residual > 1e-15);
}

TEST_CASE("single precision instantiation") {
  PenalizedQuadraticProblem<float> problem{Eigen::MatrixXf::Identity(2, 2), Eigen::Vector2f(1.0f, 0.2f), 0.5f};
  SolveOptions<float> opts;
  opts.tol = 1e-6f;
  const auto sol = solve(problem, opts);
  CHECK(sol.converged);
  CHECK(sol.coeffs(0) == doctest::Approx(0.5f));
}
