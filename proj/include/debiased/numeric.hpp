#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>

namespace debiased {

/// Pairwise (cascade) summation in a fixed order; the result depends only on
/// the values and their order, never on how the caller parallelized.
double pairwise_sum(std::span<const double> values) noexcept;

inline double pairwise_sum(const Eigen::VectorXd& values) noexcept {
  return pairwise_sum(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())));
}

inline double pairwise_mean(const Eigen::VectorXd& values) noexcept {
  return values.size() == 0 ? 0.0 : pairwise_sum(values) / static_cast<double>(values.size());
}

/// Two-sided standard normal critical value z_{(1+level)/2}.
double normal_critical_value(double level);

}  // namespace debiased
