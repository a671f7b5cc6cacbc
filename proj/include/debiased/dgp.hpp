#pragma once

// Gaussian data generating processes with known target values.
//
// Every generator draws X_i iid N(0, I_p), so the dictionary of raw
// coordinates has identity second moment and the average product
// E[Z E[Y|X]] equals pi'gamma.

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "debiased/dictionary.hpp"

namespace debiased {

using Eigen::Matrix2d;

/// E[Y|X] = X'gamma, E[Z|X] = X'pi, (Y - X'gamma, Z - X'pi) ~ N(0, Omega).
struct Assumption1Config {
  VectorXd gamma;
  VectorXd pi;
  Matrix2d omega = Matrix2d::Identity();
  /// Eigenvalues of omega must lie in [1/m_bound, m_bound].
  double m_bound = 10.0;

  Index p() const { return gamma.size(); }
  void validate() const;
};

/// Y = Z theta + X'mu + eps, Z = X'pi + u with independent Gaussian u, eps.
struct Assumption2Config {
  double theta = 0.0;
  VectorXd mu;
  VectorXd pi;
  double sigma_u2 = 1.0;
  double sigma_eps2 = 1.0;
  double m_bound = 10.0;

  Index p() const { return mu.size(); }
  void validate() const;
};

/// Two-point-prior construction: gamma = pi = c_n delta with delta uniform
/// on k-sparse 0/1 vectors, c_n = c0 sqrt(ln p / n), k = floor(c1 sqrt(n / ln p)),
/// and residual covariance [[1 - c_n^2 k, -c_n^2 k], [-c_n^2 k, 1 - c_n^2 k]].
struct LowerBoundConfig {
  Index p = 0;
  Index n = 0;
  double c0 = 0.0;
  double c1 = 0.0;
  double kappa = 0.5;
  double c_zero = 1.0;  // C_0
  double m1 = 1.0;
  double m2 = 2.0;

  /// The largest admissible constants: c0 = sqrt(kappa / 12) and
  /// c1 = min(M1, 2 C0) / c0.
  static LowerBoundConfig with_default_constants(Index n, Index p);

  double c_n() const;
  /// floor(c1 sqrt(n / ln p)) clamped to [1, p - 1].
  Index k() const;
  /// c_n^2 k.
  double theta() const;
  Matrix2d omega_bar() const;
  /// Throws InvalidConfig unless c0 <= sqrt(kappa/12), c0 c1 <= min(M1, 2 C0),
  /// c0^2 c1 <= sqrt(n / ln p) / 2 (1 - 1/M2), c_n^2 k <= 1/2 and omega_bar
  /// is positive definite.
  void validate() const;
};

/// x = (d, w) with d ~ Bernoulli(treat_prob) independent of w uniform on
/// the centered grid {k - (levels - 1)/2 : k = 0..levels-1};
/// Y = d (1 + w) + w^2 + N(0, noise_sd^2), so theta = 1. The
/// conditional mean is not linear in (1, d, w) while the Riesz representer
/// of the treatment effect, d / q - (1 - d) / (1 - q), is.
struct DiscreteAteConfig {
  double treat_prob = 0.5;
  Index levels = 3;
  double noise_sd = 1.0;

  void validate() const;
  double theta() const;
};

struct Simulated {
  Dataset data;
  double theta_true = 0.0;
  /// Coefficients actually used (gamma/pi, or mu/pi for the partial linear
  /// model); empty for the discrete design.
  VectorXd gamma;
  VectorXd pi;
};

Simulated gen_assumption1(Index n, const Assumption1Config& cfg, std::uint64_t seed);
Simulated gen_assumption2(Index n, const Assumption2Config& cfg, std::uint64_t seed);
/// Draws a fresh support delta from the seed, then simulates.
Simulated gen_lowerbound(Index n, const LowerBoundConfig& cfg, std::uint64_t seed);
Simulated gen_discrete_ate(Index n, const DiscreteAteConfig& cfg, std::uint64_t seed);

/// The partial linear reparameterization: theta = O12/O22,
/// mu = gamma - pi O12/O22, sigma_u^2 = O22, sigma_eps^2 = O11 - O12^2/O22.
Assumption2Config map_beta_to_lambda(const Assumption1Config& beta);

double true_avg_product(const Assumption1Config& cfg);
double true_avg_product(const Assumption2Config& cfg);
double true_avg_product(const LowerBoundConfig& cfg);

}  // namespace debiased
