#include "debiased/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "debiased/errors.hpp"
#include "debiased/numeric.hpp"
#include "debiased/rng.hpp"

namespace debiased {

namespace {

// D v over the nonzero coordinates of v only.
VectorXd sparse_times(const Eigen::Ref<const MatrixXd>& design, const VectorXd& v) {
  VectorXd out = VectorXd::Zero(design.rows());
  for (Index j = 0; j < v.size(); ++j) {
    if (v(j) != 0.0) out.noalias() += v(j) * design.col(j);
  }
  return out;
}

void finish(EstimateReport& report, const VectorXd& summands) {
  report.n = summands.size();
  report.theta_hat = pairwise_mean(summands);
  report.psi = summands.array() - report.theta_hat;
  report.v_hat = pairwise_mean(VectorXd(report.psi.array().square()));
  for (const auto& fit : report.fits) {
    report.converged = report.converged && fit.regression.converged && fit.riesz.converged;
  }
}

template <typename Derived>
void permute_rows_in_place(Eigen::MatrixBase<Derived>& m, const std::vector<Index>& order) {
  VectorXd buffer(m.rows());
  for (Index c = 0; c < m.cols(); ++c) {
    for (std::size_t k = 0; k < order.size(); ++k) buffer(static_cast<Index>(k)) = m(order[k], c);
    m.col(c) = buffer;
  }
}

}  // namespace

void FoldAssignment::validate(Index n) const {
  require(static_cast<Index>(first.size() + second.size()) == n, ErrorKind::InvalidArgs,
          "fold sizes do not add up to n");
  const auto gap = static_cast<Index>(first.size()) - static_cast<Index>(second.size());
  require(gap >= -1 && gap <= 1, ErrorKind::InvalidArgs, "fold sizes differ by more than one");
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (const auto* fold : {&first, &second}) {
    for (Index i : *fold) {
      require(i >= 0 && i < n, ErrorKind::InvalidArgs, "fold index out of range");
      require(!seen[static_cast<std::size_t>(i)], ErrorKind::InvalidArgs, "folds are not disjoint");
      seen[static_cast<std::size_t>(i)] = 1;
    }
  }
}

FoldAssignment split_two_fold(Index n, std::uint64_t seed) {
  require(n >= 2, ErrorKind::TooFewRows, "two-fold split needs at least 2 rows, got " + std::to_string(n));
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  Engine engine = make_engine(seed);
  for (std::size_t i = perm.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(engine, i + 1));
    std::swap(perm[i], perm[j]);
  }
  const auto half = static_cast<std::ptrdiff_t>((perm.size() + 1) / 2);
  FoldAssignment folds;
  folds.first.assign(perm.begin(), perm.begin() + half);
  folds.second.assign(perm.begin() + half, perm.end());
  std::sort(folds.first.begin(), folds.first.end());
  std::sort(folds.second.begin(), folds.second.end());
  return folds;
}

Interval EstimateReport::ci(double level) const { return confidence_interval(*this, level); }

Interval confidence_interval(const EstimateReport& report, double level) {
  const double z = normal_critical_value(level);
  require(report.v_hat >= 0.0, ErrorKind::InvalidArgs, "variance estimate is negative");
  require(report.n >= 1, ErrorKind::InvalidArgs, "report has no observations");
  const double half = z * std::sqrt(report.v_hat / static_cast<double>(report.n));
  return {report.theta_hat - half, report.theta_hat + half};
}

EstimateReport estimate_avg_product_crossfit(Dataset&& data, const Dictionary& dict, double penalty,
                                             const FoldAssignment& folds, const EstimatorOptions& opts) {
  data.validate();
  check_compatible(AverageProduct{}, dict, data);
  const Index n = data.n();
  require(n >= 4, ErrorKind::TooFewRows, "cross-fitting needs at least 4 rows, got " + std::to_string(n));
  folds.validate(n);
  require(folds.first.size() >= 2 && folds.second.size() >= 2, ErrorKind::TooFewRows,
          "each fold needs at least 2 rows");
  require(penalty >= 0.0, ErrorKind::InvalidArgs, "penalty must be nonnegative");
  const double riesz_penalty = opts.riesz_penalty.value_or(penalty);
  require(riesz_penalty >= 0.0, ErrorKind::InvalidArgs, "Riesz penalty must be nonnegative");

  // Lay the rows out fold by fold so every fold and its complement is a
  // contiguous block of the design.
  std::vector<Index> order = folds.first;
  order.insert(order.end(), folds.second.begin(), folds.second.end());
  const Index n1 = static_cast<Index>(folds.first.size());

  VectorXd y(n);
  VectorXd z(n);
  for (Index k = 0; k < n; ++k) {
    y(k) = data.y(order[static_cast<std::size_t>(k)]);
    z(k) = (*data.z)(order[static_cast<std::size_t>(k)]);
  }
  permute_rows_in_place(data.x, order);
  MatrixXd owned;
  if (!dict.is_identity()) {
    owned = dict.design(data.x);
    data.x.resize(0, 0);
  }
  const MatrixXd& design = dict.is_identity() ? data.x : owned;

  EstimateReport report;
  report.penalty = penalty;
  report.riesz_penalty = riesz_penalty;
  report.folds = folds;
  VectorXd summands(n);

  const Index offsets[2] = {0, n1};
  const Index sizes[2] = {n1, n - n1};
  for (int fold = 0; fold < 2; ++fold) {
    const int other = 1 - fold;
    const auto own_rows = design.middleRows(offsets[fold], sizes[fold]);
    const auto other_rows = design.middleRows(offsets[other], sizes[other]);
    const double other_n = static_cast<double>(sizes[other]);

    VectorXd mu = other_rows.transpose() * y.segment(offsets[other], sizes[other]);
    mu /= other_n;
    VectorXd target_m = other_rows.transpose() * z.segment(offsets[other], sizes[other]);
    target_m /= other_n;

    LearnerFit fit;
    fit.regression = solve(GramPenalizedProblem<double>{own_rows, std::move(mu), penalty}, opts.solver);
    fit.riesz = solve(GramPenalizedProblem<double>{own_rows, std::move(target_m), riesz_penalty}, opts.solver);

    const VectorXd rho = sparse_times(own_rows, fit.regression.coeffs);
    const VectorXd alpha = sparse_times(own_rows, fit.riesz.coeffs);
    for (Index k = 0; k < sizes[fold]; ++k) {
      const Index row = offsets[fold] + k;
      const double value = rho(k) * z(row) + alpha(k) * y(row) - alpha(k) * rho(k);
      summands(order[static_cast<std::size_t>(row)]) = value;
    }
    report.fits.push_back(std::move(fit));
  }
  finish(report, summands);
  return report;
}

EstimateReport estimate_avg_product_crossfit(const Dataset& data, const Dictionary& dict, double penalty,
                                             const FoldAssignment& folds, const EstimatorOptions& opts) {
  Dataset copy = data;
  return estimate_avg_product_crossfit(std::move(copy), dict, penalty, folds, opts);
}

EstimateReport estimate_avg_product_crossfit(const Dataset& data, const Dictionary& dict, double penalty,
                                             std::uint64_t seed, const EstimatorOptions& opts) {
  return estimate_avg_product_crossfit(data, dict, penalty, split_two_fold(data.n(), seed), opts);
}

EstimateReport estimate_functional_nocrossfit(const Dataset& data, const Dictionary& dict,
                                              const FunctionalSpec& functional, double penalty,
                                              const EstimatorOptions& opts) {
  data.validate();
  check_compatible(functional, dict, data);
  require(penalty >= 0.0, ErrorKind::InvalidArgs, "penalty must be nonnegative");
  const double riesz_penalty = opts.riesz_penalty.value_or(penalty);
  require(riesz_penalty >= 0.0, ErrorKind::InvalidArgs, "Riesz penalty must be nonnegative");
  const Index n = data.n();
  const double inv_n = 1.0 / static_cast<double>(n);

  MatrixXd owned;
  if (!dict.is_identity()) owned = dict.design(data.x);
  const MatrixXd& design = dict.is_identity() ? data.x : owned;

  const bool average_product = std::holds_alternative<AverageProduct>(functional);
  MatrixXd fdesign;
  VectorXd mu = design.transpose() * data.y * inv_n;
  VectorXd target_m;
  if (average_product) {
    target_m = design.transpose() * (*data.z) * inv_n;
  } else {
    const auto rows = all_rows(data);
    fdesign = functional_design(functional, dict, data, rows);
    target_m = fdesign.colwise().sum().transpose() * inv_n;
  }

  LearnerFit fit;
  fit.regression = solve(GramPenalizedProblem<double>{design, std::move(mu), penalty}, opts.solver);
  fit.riesz = solve(GramPenalizedProblem<double>{design, std::move(target_m), riesz_penalty}, opts.solver);

  const VectorXd rho = sparse_times(design, fit.regression.coeffs);
  const VectorXd alpha = sparse_times(design, fit.riesz.coeffs);
  const VectorXd m_values = average_product ? VectorXd(data.z->cwiseProduct(rho))
                                            : VectorXd(fdesign * fit.regression.coeffs);
  VectorXd summands(n);
  for (Index i = 0; i < n; ++i) summands(i) = m_values(i) + alpha(i) * (data.y(i) - rho(i));

  EstimateReport report;
  report.penalty = penalty;
  report.riesz_penalty = riesz_penalty;
  report.fits.push_back(std::move(fit));
  finish(report, summands);
  return report;
}

}  // namespace debiased
