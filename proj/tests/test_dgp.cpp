#include <doctest.h>

#include <cmath>

#include "debiased/dgp.hpp"
#include "debiased/errors.hpp"
#include "debiased/sparsity.hpp"

using namespace debiased;

namespace {

VectorXd unit(Index p, Index j) {
  VectorXd v = VectorXd::Zero(p);
  v(j) = 1.0;
  return v;
}

// OLS of y on the columns of a with heteroskedasticity-free standard errors.
struct Ols {
  VectorXd coef;
  VectorXd se;
};

Ols ols(const MatrixXd& a, const VectorXd& y) {
  const MatrixXd gram = a.transpose() * a;
  Ols out;
  out.coef = gram.ldlt().solve(a.transpose() * y);
  const VectorXd resid = y - a * out.coef;
  const double s2 = resid.squaredNorm() / double(a.rows() - a.cols());
  out.se = (s2 * gram.inverse().diagonal()).cwiseSqrt();
  return out;
}

// Mean and standard error of the entries of v.
std::pair<double, double> mean_se(const VectorXd& v) {
  const double m = v.mean();
  const double var = (v.array() - m).square().sum() / double(v.size() - 1);
  return {m, std::sqrt(var / double(v.size()))};
}

}  // namespace

TEST_CASE("joint Gaussian design examples") {
  Assumption1Config zero;
  zero.gamma = VectorXd::Zero(3);
  zero.pi = VectorXd::Zero(3);
  const auto sim0 = gen_assumption1(20000, zero, 1);
  CHECK(sim0.theta_true == 0.0);
  CHECK(std::abs(sim0.data.y.mean()) < 4.0 / std::sqrt(20000.0));
  CHECK(std::abs(sim0.data.z->mean()) < 4.0 / std::sqrt(20000.0));

  Assumption1Config orth;
  orth.gamma = unit(2, 0);
  orth.pi = unit(2, 1);
  CHECK(true_avg_product(orth) == 0.0);
  CHECK(gen_assumption1(10, orth, 0).theta_true == 0.0);

  Assumption1Config e1;
  e1.gamma = unit(2, 0);
  e1.pi = unit(2, 0);
  CHECK(true_avg_product(e1) == 1.0);
  const Index n = 100000;
  const auto sim = gen_assumption1(n, e1, 2);
  CHECK(sim.theta_true == 1.0);
  const VectorXd summand = sim.data.z->cwiseProduct(sim.data.x * e1.gamma);
  const auto [m, se] = mean_se(summand);
  CHECK(std::abs(m - 1.0) < 4.0 * se);
}

TEST_CASE("partial linear design examples") {
  const Index n = 100000;
  Assumption2Config null;
  null.mu = VectorXd::Zero(2);
  null.pi = VectorXd::Zero(2);
  const auto s0 = gen_assumption2(n, null, 3);
  CHECK(s0.theta_true == 0.0);
  MatrixXd a(n, 1);
  a.col(0) = *s0.data.z;
  const Ols fit0 = ols(a, s0.data.y);
  CHECK(std::abs(fit0.coef(0)) < 4.0 * fit0.se(0));

  Assumption2Config two = null;
  two.theta = 2.0;
  CHECK(true_avg_product(two) == 2.0);
  const auto s2 = gen_assumption2(n, two, 4);
  a.col(0) = *s2.data.z;
  const Ols fit2 = ols(a, s2.data.y);
  CHECK(std::abs(fit2.coef(0) - 2.0) < 4.0 * fit2.se(0));
}

TEST_CASE("reparameterization") {
  Assumption1Config beta;
  beta.gamma = VectorXd::Zero(3);
  beta.pi = VectorXd::Zero(3);
  beta.omega << 1.0, 0.5, 0.5, 1.0;
  const auto lambda = map_beta_to_lambda(beta);
  CHECK(lambda.theta == 0.5);
  CHECK(lambda.mu.isZero(0.0));
  CHECK(lambda.sigma_u2 == 1.0);
  CHECK(lambda.sigma_eps2 == doctest::Approx(0.75).epsilon(1e-15));

  Assumption1Config identity;
  identity.gamma = (VectorXd(3) << 0.3, -1.0, 2.0).finished();
  identity.pi = (VectorXd(3) << 1.0, 0.0, 0.5).finished();
  const auto li = map_beta_to_lambda(identity);
  CHECK(li.theta == 0.0);
  CHECK(li.mu == identity.gamma);
  CHECK(li.sigma_u2 == 1.0);
  CHECK(li.sigma_eps2 == 1.0);

  Assumption1Config degenerate = beta;
  degenerate.omega << 1.0, 0.0, 0.0, 0.0;
  try {
    (void)map_beta_to_lambda(degenerate);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateOmega);
  }
}

TEST_CASE("both parameterizations give the same regression coefficient") {
  Assumption1Config beta;
  beta.gamma = (VectorXd(3) << 0.5, -0.25, 0.0).finished();
  beta.pi = (VectorXd(3) << 0.0, 0.5, 1.0).finished();
  beta.omega << 1.0, 0.4, 0.4, 1.5;
  const Assumption2Config lambda = map_beta_to_lambda(beta);
  const double target = 0.4 / 1.5;
  CHECK(lambda.theta == doctest::Approx(target));

  const Index n = 100000;
  for (int which = 0; which < 2; ++which) {
    const auto sim = which == 0 ? gen_assumption1(n, beta, 5) : gen_assumption2(n, lambda, 6);
    MatrixXd a(n, 4);
    a.col(0) = *sim.data.z;
    a.rightCols(3) = sim.data.x;
    const Ols fit = ols(a, sim.data.y);
    CHECK(std::abs(fit.coef(0) - target) < 4.0 * fit.se(0));
  }
}

TEST_CASE("sample moments at large n") {
  const Index n = 100000, p = 10;
  Assumption1Config cfg;
  cfg.gamma = (VectorXd(p) << 1, 0.5, 0, 0, 0, -0.3, 0, 0, 0, 0.1).finished();
  cfg.pi = VectorXd::LinSpaced(p, 0.5, -0.5);
  cfg.omega << 1.5, -0.6, -0.6, 0.8;
  const auto sim = gen_assumption1(n, cfg, 7);
  const MatrixXd xx = sim.data.x.transpose() * sim.data.x / double(n);
  CHECK((xx - MatrixXd::Identity(p, p)).cwiseAbs().maxCoeff() <= 5.0 * std::sqrt(std::log(double(p)) / n));

  MatrixXd q(n, 2);
  q.col(0) = sim.data.y - sim.data.x * cfg.gamma;
  q.col(1) = *sim.data.z - sim.data.x * cfg.pi;
  const MatrixXd cov = q.transpose() * q / double(n);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      // Var(q_a q_b) = O_aa O_bb + O_ab^2 for centered Gaussians
      const double se =
          std::sqrt((cfg.omega(a, a) * cfg.omega(b, b) + cfg.omega(a, b) * cfg.omega(a, b)) / double(n));
      CHECK(std::abs(cov(a, b) - cfg.omega(a, b)) <= 5.0 * se);
    }
}

TEST_CASE("generators are deterministic in the seed") {
  Assumption1Config a1;
  a1.gamma = VectorXd::LinSpaced(5, 1.0, 0.2);
  a1.pi = VectorXd::LinSpaced(5, -0.5, 0.5);
  const auto x = gen_assumption1(50, a1, 11);
  const auto y = gen_assumption1(50, a1, 11);
  const auto z = gen_assumption1(50, a1, 12);
  CHECK(x.data.x == y.data.x);
  CHECK(x.data.y == y.data.y);
  CHECK(*x.data.z == *y.data.z);
  CHECK(x.data.y != z.data.y);

  const auto lb_cfg = LowerBoundConfig::with_default_constants(200, 300);
  const auto l1 = gen_lowerbound(200, lb_cfg, 3);
  const auto l2 = gen_lowerbound(200, lb_cfg, 3);
  CHECK(l1.gamma == l2.gamma);
  CHECK(l1.data.y == l2.data.y);
  CHECK(*l1.data.z == *l2.data.z);

  const auto d1 = gen_discrete_ate(40, DiscreteAteConfig{}, 9);
  const auto d2 = gen_discrete_ate(40, DiscreteAteConfig{}, 9);
  CHECK(d1.data.x == d2.data.x);
  CHECK(d1.data.y == d2.data.y);
}

TEST_CASE("lower-bound design arithmetic") {
  LowerBoundConfig cfg;
  cfg.p = 8;
  cfg.n = 100;
  cfg.c0 = 0.5;
  cfg.kappa = 3.0;  // c0 = 0.5 needs kappa >= 12 c0^2
  cfg.c1 = 0.3;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.k() == 2);
  // 0.25 ln(8) / 100 * 2
  CHECK(cfg.theta() == doctest::Approx(0.010397207708399179).epsilon(1e-14));
  CHECK(true_avg_product(cfg) == cfg.theta());
  CHECK(cfg.c_n() == doctest::Approx(0.5 * std::sqrt(std::log(8.0) / 100.0)));

  LowerBoundConfig wide = cfg;
  wide.c1 = 1.0;
  CHECK(wide.k() == 6);

  const auto sim = gen_lowerbound(100, cfg, 4);
  CHECK(sim.theta_true == cfg.theta());
  CHECK((sim.gamma.array() != 0.0).count() == 2);
  CHECK(sim.gamma == sim.pi);
  CHECK(sim.gamma.maxCoeff() == cfg.c_n());
  CHECK(sim.gamma.dot(sim.pi) == doctest::Approx(cfg.theta()).epsilon(1e-14));

  const Matrix2d omega = cfg.omega_bar();
  CHECK(omega(0, 0) == doctest::Approx(1.0 - cfg.theta()));
  CHECK(omega(0, 1) == doctest::Approx(-cfg.theta()));
  CHECK(omega.selfadjointView<Eigen::Lower>().eigenvalues().minCoeff() > 0.0);

  CHECK_THROWS_AS((void)gen_lowerbound(99, cfg, 0), Error);
  LowerBoundConfig bad = cfg;
  bad.kappa = 0.5;
  try {
    bad.validate();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidConfig);
  }
}

TEST_CASE("default lower-bound constants are feasible and keep the class") {
  for (Index n : {100, 400, 1600, 6400}) {
    const auto p = static_cast<Index>(std::llround(std::pow(double(n), 1.2)));
    const auto cfg = LowerBoundConfig::with_default_constants(n, p);
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.c0 == doctest::Approx(std::sqrt(0.5 / 12.0)));
    CHECK(cfg.theta() <= 0.5);
    CHECK(cfg.k() >= 1);
    CHECK(cfg.k() <= p - 1);
    for (unsigned seed = 0; seed < 3; ++seed) {
      const auto sim = gen_lowerbound(n, cfg, seed);
      CHECK((sim.gamma.array() != 0.0).count() == cfg.k());
      for (double xi : {0.1, 0.25, 0.5}) CHECK(check_membership(sim.gamma, cfg.c_zero, xi).member);
    }
  }
}

TEST_CASE("discrete treatment design") {
  DiscreteAteConfig cfg;
  CHECK(cfg.theta() == 1.0);
  const Index n = 100000;
  const auto sim = gen_discrete_ate(n, cfg, 21);
  REQUIRE(sim.data.treatment_column == Index{0});
  CHECK_NOTHROW(sim.data.validate());
  CHECK(sim.theta_true == 1.0);
  // w takes the centered values -1, 0, 1
  CHECK(sim.data.x.col(1).minCoeff() == -1.0);
  CHECK(sim.data.x.col(1).maxCoeff() == 1.0);
  CHECK(std::abs(sim.data.x.col(1).mean()) < 4.0 * std::sqrt(2.0 / 3.0 / n));
  // randomized treatment: difference in means is unbiased for theta
  double s1 = 0, s0 = 0;
  Index n1 = 0;
  for (Index i = 0; i < n; ++i) {
    if (sim.data.x(i, 0) == 1.0) {
      s1 += sim.data.y(i);
      ++n1;
    } else {
      s0 += sim.data.y(i);
    }
  }
  const double diff = s1 / n1 - s0 / (n - n1);
  // Var(Y | d) <= Var(w) (1 + d)^2 + noise, bounded by 4 here
  CHECK(std::abs(diff - 1.0) < 4.0 * std::sqrt(4.0 / n1 + 4.0 / (n - n1)));

  DiscreteAteConfig bad;
  bad.treat_prob = 1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("configuration validation") {
  Assumption1Config cfg;
  cfg.gamma = VectorXd::Ones(2);
  cfg.pi = VectorXd::Ones(2);
  cfg.omega << 1.0, 0.9999, 0.9999, 1.0;  // smallest eigenvalue 1e-4
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.omega << 1.0, 0.2, 0.3, 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.omega = Matrix2d::Identity();
  cfg.pi = VectorXd::Ones(3);
  CHECK_THROWS_AS(cfg.validate(), Error);

  Assumption2Config a2;
  a2.mu = VectorXd::Zero(2);
  a2.pi = VectorXd::Zero(2);
  a2.sigma_u2 = 100.0;
  CHECK_THROWS_AS(a2.validate(), Error);
}
