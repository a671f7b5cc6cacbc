#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "debiased/dictionary.hpp"
#include "debiased/lasso.hpp"

namespace debiased {

/// Two disjoint index sets covering 0..n-1, each sorted ascending.
struct FoldAssignment {
  std::vector<Index> first;
  std::vector<Index> second;

  Index n() const { return static_cast<Index>(first.size() + second.size()); }
  /// Disjoint, covering, sizes differ by at most one.
  void validate(Index n) const;
};

/// Seeded uniform random permutation; the first ceil(n/2) permuted indices
/// form the first fold.
FoldAssignment split_two_fold(Index n, std::uint64_t seed);

struct Interval {
  double low = 0.0;
  double high = 0.0;

  bool contains(double value) const { return low <= value && value <= high; }
  double length() const { return high - low; }
};

struct LearnerFit {
  LassoSolution<double> regression;  // gamma-hat
  LassoSolution<double> riesz;       // pi-hat
};

struct EstimateReport {
  double theta_hat = 0.0;
  double v_hat = 0.0;
  Index n = 0;
  VectorXd psi;
  double penalty = 0.0;
  double riesz_penalty = 0.0;
  /// One entry without cross-fitting, two with.
  std::vector<LearnerFit> fits;
  std::optional<FoldAssignment> folds;
  /// False when any Lasso fit hit max_iter above tolerance.
  bool converged = true;

  Interval ci(double level) const;
};

struct EstimatorOptions {
  SolveOptions<double> solver;
  /// Separate penalty for the Riesz learner; shared penalty when unset.
  std::optional<double> riesz_penalty;
};

/// Average product with special cross-fitting: the Gram matrix of each fold's
/// learners comes from the fold itself, the cross moments from the other
/// fold, and the average runs over the fold.
EstimateReport estimate_avg_product_crossfit(const Dataset& data, const Dictionary& dict, double penalty,
                                             const FoldAssignment& folds,
                                             const EstimatorOptions& opts = {});
EstimateReport estimate_avg_product_crossfit(const Dataset& data, const Dictionary& dict, double penalty,
                                             std::uint64_t seed, const EstimatorOptions& opts = {});
/// Consumes the dataset; rows are reordered in place instead of copied, which
/// halves peak memory for large raw-coordinate designs.
EstimateReport estimate_avg_product_crossfit(Dataset&& data, const Dictionary& dict, double penalty,
                                             const FoldAssignment& folds,
                                             const EstimatorOptions& opts = {});

/// Automatic debiased estimator of a linear functional without cross-fitting.
EstimateReport estimate_functional_nocrossfit(const Dataset& data, const Dictionary& dict,
                                              const FunctionalSpec& functional, double penalty,
                                              const EstimatorOptions& opts = {});

/// theta-hat +- z_{(1+level)/2} sqrt(v_hat / n).
Interval confidence_interval(const EstimateReport& report, double level);

}  // namespace debiased
