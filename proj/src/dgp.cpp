#include "debiased/dgp.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "debiased/errors.hpp"
#include "debiased/rng.hpp"

namespace debiased {

namespace {

VectorXd sparse_times(const MatrixXd& x, const VectorXd& v) {
  VectorXd out = VectorXd::Zero(x.rows());
  for (Index j = 0; j < v.size(); ++j) {
    if (v(j) != 0.0) out.noalias() += v(j) * x.col(j);
  }
  return out;
}

std::vector<std::string> default_names(Index p) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(p));
  for (Index j = 1; j <= p; ++j) names.push_back("x" + std::to_string(j));
  return names;
}

void check_eigen_bounds(const Matrix2d& omega, double m_bound) {
  require(m_bound >= 1.0, ErrorKind::InvalidConfig, "eigenvalue bound M must be at least 1");
  require(std::abs(omega(0, 1) - omega(1, 0)) <= 1e-12 * std::max(1.0, omega.cwiseAbs().maxCoeff()),
          ErrorKind::InvalidConfig, "omega must be symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix2d> eig(omega, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  require(ev.minCoeff() >= 1.0 / m_bound && ev.maxCoeff() <= m_bound, ErrorKind::InvalidConfig,
          "omega eigenvalues (" + std::to_string(ev(0)) + ", " + std::to_string(ev(1)) +
              ") outside [1/M, M]");
}

MatrixXd draw_design(Engine& engine, Index n, Index p) {
  MatrixXd x(n, p);
  fill_standard_normal(engine, x);
  return x;
}

Simulated simulate_assumption1(Index n, const VectorXd& gamma, const VectorXd& pi, const Matrix2d& omega,
                               Engine& engine) {
  const Index p = gamma.size();
  Simulated out;
  out.data.x = draw_design(engine, n, p);
  const Eigen::LLT<Matrix2d> chol(omega);
  const Matrix2d l = chol.matrixL();
  out.data.y = sparse_times(out.data.x, gamma);
  VectorXd z = sparse_times(out.data.x, pi);
  for (Index i = 0; i < n; ++i) {
    const double e1 = standard_normal(engine);
    const double e2 = standard_normal(engine);
    out.data.y(i) += l(0, 0) * e1;
    z(i) += l(1, 0) * e1 + l(1, 1) * e2;
  }
  out.data.z = std::move(z);
  out.data.x_names = default_names(p);
  out.gamma = gamma;
  out.pi = pi;
  out.theta_true = gamma.dot(pi);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// configs

void Assumption1Config::validate() const {
  require(gamma.size() >= 1, ErrorKind::InvalidConfig, "p must be at least 1");
  require(pi.size() == gamma.size(), ErrorKind::InvalidConfig, "gamma and pi lengths differ");
  require(gamma.allFinite() && pi.allFinite(), ErrorKind::InvalidConfig, "coefficients must be finite");
  check_eigen_bounds(omega, m_bound);
}

void Assumption2Config::validate() const {
  require(mu.size() >= 1, ErrorKind::InvalidConfig, "p must be at least 1");
  require(pi.size() == mu.size(), ErrorKind::InvalidConfig, "mu and pi lengths differ");
  require(mu.allFinite() && pi.allFinite() && std::isfinite(theta), ErrorKind::InvalidConfig,
          "parameters must be finite");
  require(m_bound >= 1.0, ErrorKind::InvalidConfig, "variance bound M must be at least 1");
  for (double s : {sigma_u2, sigma_eps2}) {
    require(s >= 1.0 / m_bound && s <= m_bound, ErrorKind::InvalidConfig,
            "variance " + std::to_string(s) + " outside [1/M, M]");
  }
}

LowerBoundConfig LowerBoundConfig::with_default_constants(Index n, Index p) {
  LowerBoundConfig cfg;
  cfg.n = n;
  cfg.p = p;
  cfg.c0 = std::sqrt(cfg.kappa / 12.0);
  cfg.c1 = std::min(cfg.m1, 2.0 * cfg.c_zero) / cfg.c0;
  return cfg;
}

double LowerBoundConfig::c_n() const {
  return c0 * std::sqrt(std::log(static_cast<double>(p)) / static_cast<double>(n));
}

Index LowerBoundConfig::k() const {
  const double raw = std::floor(c1 * std::sqrt(static_cast<double>(n) / std::log(static_cast<double>(p))));
  return std::clamp<Index>(static_cast<Index>(raw), 1, p - 1);
}

double LowerBoundConfig::theta() const {
  const double c = c_n();
  return c * c * static_cast<double>(k());
}

Matrix2d LowerBoundConfig::omega_bar() const {
  const double t = theta();
  Matrix2d omega;
  omega << 1.0 - t, -t, -t, 1.0 - t;
  return omega;
}

void LowerBoundConfig::validate() const {
  require(p >= 2 && n >= 2, ErrorKind::InvalidConfig, "lower-bound design needs p >= 2 and n >= 2");
  require(c0 > 0.0 && c1 > 0.0, ErrorKind::InvalidConfig, "c0 and c1 must be positive");
  require(kappa > 0.0 && c_zero > 0.0 && m1 > 0.0 && m2 > 1.0, ErrorKind::InvalidConfig,
          "kappa, C0, M1 must be positive and M2 > 1");
  const double slack = 1e-12;
  require(c0 <= std::sqrt(kappa / 12.0) * (1.0 + slack), ErrorKind::InvalidConfig,
          "c0 exceeds sqrt(kappa / 12)");
  require(c0 * c1 <= std::min(m1, 2.0 * c_zero) * (1.0 + slack), ErrorKind::InvalidConfig,
          "c0 c1 exceeds min(M1, 2 C0)");
  const double root = std::sqrt(static_cast<double>(n) / std::log(static_cast<double>(p)));
  require(c0 * c0 * c1 <= 0.5 * root * (1.0 - 1.0 / m2), ErrorKind::InvalidConfig,
          "c0^2 c1 exceeds sqrt(n / ln p) (1 - 1/M2) / 2");
  require(theta() <= 0.5, ErrorKind::InvalidConfig, "c_n^2 k exceeds 1/2");
  require(1.0 - 2.0 * theta() > 0.0, ErrorKind::InvalidConfig, "residual covariance is singular");
}

void DiscreteAteConfig::validate() const {
  require(treat_prob > 0.0 && treat_prob < 1.0, ErrorKind::InvalidConfig, "treatment probability must lie in (0, 1)");
  require(levels >= 3, ErrorKind::InvalidConfig, "need at least 3 covariate levels");
  require(noise_sd > 0.0, ErrorKind::InvalidConfig, "noise sd must be positive");
}

double DiscreteAteConfig::theta() const {
  // E[1 + w] with w symmetric about zero
  return 1.0;
}

// ---------------------------------------------------------------------------
// generators

Simulated gen_assumption1(Index n, const Assumption1Config& cfg, std::uint64_t seed) {
  cfg.validate();
  require(n >= 2, ErrorKind::InvalidConfig, "n must be at least 2");
  Engine engine = make_engine(seed);
  return simulate_assumption1(n, cfg.gamma, cfg.pi, cfg.omega, engine);
}

Simulated gen_assumption2(Index n, const Assumption2Config& cfg, std::uint64_t seed) {
  cfg.validate();
  require(n >= 2, ErrorKind::InvalidConfig, "n must be at least 2");
  Engine engine = make_engine(seed);
  const Index p = cfg.p();
  Simulated out;
  out.data.x = draw_design(engine, n, p);
  VectorXd z = sparse_times(out.data.x, cfg.pi);
  VectorXd y = sparse_times(out.data.x, cfg.mu);
  const double su = std::sqrt(cfg.sigma_u2);
  const double se = std::sqrt(cfg.sigma_eps2);
  for (Index i = 0; i < n; ++i) {
    const double u = standard_normal(engine);
    const double eps = standard_normal(engine);
    z(i) += su * u;
    y(i) += z(i) * cfg.theta + se * eps;
  }
  out.data.y = std::move(y);
  out.data.z = std::move(z);
  out.data.x_names = default_names(p);
  out.gamma = cfg.mu;
  out.pi = cfg.pi;
  out.theta_true = cfg.theta;
  return out;
}

Simulated gen_lowerbound(Index n, const LowerBoundConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  require(n == cfg.n, ErrorKind::InvalidConfig,
          "sample size " + std::to_string(n) + " differs from the configured n = " + std::to_string(cfg.n));
  Engine engine = make_engine(seed);
  const Index k = cfg.k();
  std::vector<Index> perm(static_cast<std::size_t>(cfg.p));
  std::iota(perm.begin(), perm.end(), Index{0});
  for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_below(engine, perm.size() - i));
    std::swap(perm[i], perm[j]);
  }
  VectorXd coeffs = VectorXd::Zero(cfg.p);
  for (Index j = 0; j < k; ++j) coeffs(perm[static_cast<std::size_t>(j)]) = cfg.c_n();
  Simulated out = simulate_assumption1(n, coeffs, coeffs, cfg.omega_bar(), engine);
  out.theta_true = cfg.theta();
  return out;
}

Simulated gen_discrete_ate(Index n, const DiscreteAteConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  require(n >= 2, ErrorKind::InvalidConfig, "n must be at least 2");
  Engine engine = make_engine(seed);
  Simulated out;
  out.data.x.resize(n, 2);
  out.data.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double d = uniform01(engine) < cfg.treat_prob ? 1.0 : 0.0;
    const double w = static_cast<double>(uniform_below(engine, static_cast<std::uint64_t>(cfg.levels))) -
                     0.5 * static_cast<double>(cfg.levels - 1);
    out.data.x(i, 0) = d;
    out.data.x(i, 1) = w;
    out.data.y(i) = d * (1.0 + w) + w * w + cfg.noise_sd * standard_normal(engine);
  }
  out.data.x_names = {"x1", "x2"};
  out.data.treatment_column = 0;
  out.theta_true = cfg.theta();
  return out;
}

Assumption2Config map_beta_to_lambda(const Assumption1Config& beta) {
  const Matrix2d& o = beta.omega;
  require(o(1, 1) > 0.0, ErrorKind::DegenerateOmega, "Omega_22 must be positive");
  Assumption2Config lambda;
  lambda.theta = o(0, 1) / o(1, 1);
  lambda.mu = beta.gamma - beta.pi * lambda.theta;
  lambda.pi = beta.pi;
  lambda.sigma_u2 = o(1, 1);
  lambda.sigma_eps2 = o(0, 0) - o(0, 1) * o(0, 1) / o(1, 1);
  lambda.m_bound = beta.m_bound;
  return lambda;
}

double true_avg_product(const Assumption1Config& cfg) { return cfg.gamma.dot(cfg.pi); }
double true_avg_product(const Assumption2Config& cfg) { return cfg.theta; }
double true_avg_product(const LowerBoundConfig& cfg) { return cfg.theta(); }

}  // namespace debiased
