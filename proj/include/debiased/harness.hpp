#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "debiased/dgp.hpp"
#include "debiased/estimators.hpp"
#include "debiased/sparsity.hpp"

namespace debiased {

/// r = c sqrt(ln p / n) ln(ln(max(n, 16))): slightly above sqrt(ln p / n)
/// and growing with n only through the iterated logarithm.
double default_penalty(Index n, Index p, double c);

inline constexpr double kDefaultPenaltyConstant = 0.9;

// ---------------------------------------------------------------------------
// Monte Carlo configuration

/// Coefficient recipe resolved once p is known.
struct CoeffSpec {
  enum class Style { Zero, PowerLawDecay, PermutedPowerLaw, ExactKSparse };
  Style style = Style::PowerLawDecay;
  double xi = 1.0;
  double c = 1.0;
  Index k = 1;
  double magnitude = 1.0;
  /// Rescale to this Euclidean norm after construction.
  std::optional<double> l2_norm;
};

VectorXd resolve_coeffs(Index p, const CoeffSpec& spec, std::uint64_t seed);

struct Assumption1Dgp {
  CoeffSpec gamma;
  CoeffSpec pi;
  Matrix2d omega = Matrix2d::Identity();
  double m_bound = 10.0;
};

struct Assumption2Dgp {
  double theta = 0.0;
  CoeffSpec mu;
  CoeffSpec pi;
  double sigma_u2 = 1.0;
  double sigma_eps2 = 1.0;
  double m_bound = 10.0;
};

/// Lower-bound design; unset c0/c1 take LowerBoundConfig's default constants.
struct LowerBoundDgp {
  std::optional<double> c0;
  std::optional<double> c1;
  double kappa = 0.5;
  double c_zero = 1.0;
  double m1 = 1.0;
  double m2 = 2.0;

  LowerBoundConfig resolve(Index n, Index p) const;
};

using DgpConfig = std::variant<Assumption1Dgp, Assumption2Dgp, LowerBoundDgp, DiscreteAteConfig>;

struct EstimatorChoice {
  enum class Kind { CrossfitAvgProduct, NoCrossfit };
  Kind kind = Kind::CrossfitAvgProduct;
  /// Functional name for the no-cross-fit estimator: avg_product, ate[:col], wad[:col].
  std::string functional = "avg_product";
};

struct PRule {
  enum class Kind { Fixed, Linear, Power };
  Kind kind = Kind::Linear;
  /// Fixed p, linear factor (p = round(factor n)) or exponent (p = round(n^exponent)).
  double value = 2.0;

  Index operator()(Index n) const;
};

struct PenaltyRule {
  double c = kDefaultPenaltyConstant;
  /// Use this r for every n instead of the rule.
  std::optional<double> fixed;

  double operator()(Index n, Index p) const;
};

struct McConfig {
  DgpConfig dgp = Assumption1Dgp{};
  EstimatorChoice estimator;
  std::string dictionary = "raw";
  std::vector<Index> n_grid;
  PRule p_rule;
  Index replications = 100;
  PenaltyRule penalty;
  double level = 0.95;
  std::uint64_t master_seed = 0;
  /// Worker threads; unset reads DEBIASED_THREADS, then the hardware count.
  std::optional<unsigned> threads;
  /// Cap on concurrently resident design matrices.
  double memory_budget_mb = 4096.0;
  /// Keep every replication's outcome in the summary.
  bool keep_replications = false;

  void validate() const;
};

struct ReplicationOutcome {
  bool ok = false;
  std::string failure;
  double theta_hat = 0.0;
  double theta_true = 0.0;
  double v_hat = 0.0;
  Interval ci;
  bool converged = false;
};

struct McRow {
  Index n = 0;
  Index p = 0;
  double r = 0.0;
  double bias = 0.0;
  double rmse = 0.0;
  double error_sd = 0.0;
  double median_abs_error = 0.0;
  double coverage = 0.0;
  double mean_ci_length = 0.0;
  double mean_v_hat = 0.0;
  double mean_theta_true = 0.0;
  Index censored = 0;
  Index aggregated = 0;
  Index replications = 0;
  std::vector<ReplicationOutcome> outcomes;
};

struct McSummary {
  McConfig config;
  std::vector<McRow> rows;
};

/// Worker count: DEBIASED_THREADS when set and positive, else the hardware
/// concurrency (at least 1).
unsigned default_worker_count();

/// One replication at a given grid point. Pure in (cfg, n_index, rep).
ReplicationOutcome run_replication(const McConfig& cfg, std::size_t n_index, Index rep);

/// Runs every replication for every n and aggregates; bit-identical for any
/// worker count. Failed or non-converged replications are censored.
McSummary run_mc(const McConfig& cfg);

// ---------------------------------------------------------------------------
// rate boundary curves

struct BoundaryRow {
  std::string curve;
  double xi1 = 0.0;
  std::optional<double> xi2;
  double value = 0.0;
};

/// Sampled boundary curves. For "triangle", "box" and "hyperbola" the value
/// is the smallest xi2 meeting the corresponding condition at xi1:
/// xi1 + xi2 = 1/2, max(xi1, xi2) = 1/2 and
/// xi1/(2 xi1 + 1) + xi2/(2 xi2 + 1) = 1/2. "rate_exponent" is
/// 2 t / (2 t + 1) at t = xi1, and "rate_surface" the same exponent at
/// t = max(xi1, xi2) over the grid squared. The grid is sorted and
/// deduplicated first.
std::vector<BoundaryRow> rate_boundaries(std::vector<double> grid);

}  // namespace debiased
