#include "debiased/sparsity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "debiased/errors.hpp"
#include "debiased/rng.hpp"

namespace debiased {

namespace {

// Magnitudes sorted descending, stable by index.
std::vector<double> sorted_magnitudes(const VectorXd& v) {
  std::vector<Index> order(static_cast<std::size_t>(v.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return std::abs(v(a)) > std::abs(v(b)); });
  std::vector<double> mags(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) mags[k] = std::abs(v(order[k]));
  return mags;
}

// tail[t] = sum of squares beyond the t largest entries, accumulated from the
// smallest upward; tail.size() == p + 1.
std::vector<double> tail_squares(const std::vector<double>& mags) {
  std::vector<double> tail(mags.size() + 1, 0.0);
  for (std::size_t t = mags.size(); t-- > 0;) tail[t] = tail[t + 1] + mags[t] * mags[t];
  return tail;
}

void check_class_params(double c, double xi) {
  require(c > 0.0, ErrorKind::InvalidArgs, "class constant must be positive");
  require(xi > 0.0, ErrorKind::InvalidArgs, "approximation exponent must be positive");
}

VectorXd power_law(Index p, double xi, double c) {
  VectorXd v(p);
  for (Index j = 0; j < p; ++j) v(j) = std::pow(static_cast<double>(j + 1), -(xi + 0.5));
  const MembershipReport base = check_membership(v, c, xi);
  if (base.worst_ratio > 0.0) v *= (1.0 - 1e-12) / base.worst_ratio;
  return v;
}

}  // namespace

double approx_error_l2(const VectorXd& v, Index t) {
  require(t >= 0 && t <= v.size(), ErrorKind::InvalidArgs, "t must lie in [0, p]");
  const auto tail = tail_squares(sorted_magnitudes(v));
  return std::sqrt(tail[static_cast<std::size_t>(t)]);
}

MembershipReport check_membership(const VectorXd& v, double c, double xi, std::optional<Index> t_max) {
  check_class_params(c, xi);
  const auto tail = tail_squares(sorted_magnitudes(v));
  MembershipReport report;
  report.member = true;
  if (t_max) report.member_truncated = true;
  double worst = -1.0;
  for (Index t = 1; t <= v.size(); ++t) {
    const double error = std::sqrt(tail[static_cast<std::size_t>(t)]);
    const double bound = c * std::pow(static_cast<double>(t), -xi);
    const bool ok = error <= bound;
    report.member = report.member && ok;
    if (t_max && t <= *t_max) report.member_truncated = *report.member_truncated && ok;
    const double ratio = error / bound;
    if (ratio > worst) {
      worst = ratio;
      report.worst_t = t;
    }
  }
  report.worst_ratio = std::max(worst, 0.0);
  return report;
}

double certified_constant(const VectorXd& v, double xi) {
  return check_membership(v, 1.0, xi).worst_ratio;
}

Index truncated_sparsity_level(double c, double xi, Index p, Index n) {
  check_class_params(c, xi);
  require(p >= 2 && n >= 1, ErrorKind::InvalidArgs, "need p >= 2 and n >= 1");
  const double rate = std::log(static_cast<double>(p)) / static_cast<double>(n);
  return static_cast<Index>(std::floor(c * std::pow(rate, -2.0 / (2.0 * xi + 1.0))));
}

VectorXd make_coeffs(Index p, const SparseApproxSpec& spec, std::uint64_t seed) {
  require(p >= 1, ErrorKind::InvalidArgs, "p must be at least 1");
  check_class_params(spec.c, spec.xi);
  Engine engine = make_engine(seed);
  switch (spec.style) {
    case SparsityStyle::PowerLawDecay:
      return power_law(p, spec.xi, spec.c);
    case SparsityStyle::PermutedPowerLaw: {
      const VectorXd base = power_law(p, spec.xi, spec.c);
      std::vector<Index> perm(static_cast<std::size_t>(p));
      std::iota(perm.begin(), perm.end(), Index{0});
      for (std::size_t i = perm.size() - 1; i > 0; --i) {
        std::swap(perm[i], perm[static_cast<std::size_t>(uniform_below(engine, i + 1))]);
      }
      VectorXd v(p);
      for (Index j = 0; j < p; ++j) {
        const double sign = uniform_below(engine, 2) == 0 ? 1.0 : -1.0;
        v(perm[static_cast<std::size_t>(j)]) = sign * base(j);
      }
      return v;
    }
    case SparsityStyle::ExactKSparse: {
      require(spec.k >= 1 && spec.k <= p, ErrorKind::InvalidArgs, "k must lie in [1, p]");
      std::vector<Index> perm(static_cast<std::size_t>(p));
      std::iota(perm.begin(), perm.end(), Index{0});
      // partial Fisher-Yates: the first k slots are a uniform k-subset
      for (std::size_t i = 0; i < static_cast<std::size_t>(spec.k); ++i) {
        const auto j = i + static_cast<std::size_t>(uniform_below(engine, perm.size() - i));
        std::swap(perm[i], perm[j]);
      }
      VectorXd v = VectorXd::Zero(p);
      for (Index j = 0; j < spec.k; ++j) v(perm[static_cast<std::size_t>(j)]) = spec.magnitude;
      if (!check_membership(v, spec.c, spec.xi).member) {
        throw Error(ErrorKind::InfeasibleSpec, "k = " + std::to_string(spec.k) + " entries of magnitude " +
                                                   std::to_string(spec.magnitude) +
                                                   " exceed the class bound c t^{-xi}");
      }
      return v;
    }
  }
  throw Error(ErrorKind::InvalidArgs, "unknown sparsity style");
}

TailBoundReport tail_l1_bound_check(const VectorXd& v, double c, double r_exp) {
  require(r_exp > 0.5, ErrorKind::InvalidArgs, "the l1 tail bound needs an exponent above 1/2");
  require(check_membership(v, c, r_exp).member, ErrorKind::PreconditionViolated,
          "vector is not in the approximate sparsity class with the given constant and exponent");
  const auto mags = sorted_magnitudes(v);
  std::vector<double> tail(mags.size() + 1, 0.0);
  for (std::size_t t = mags.size(); t-- > 0;) tail[t] = tail[t + 1] + mags[t];

  TailBoundReport report;
  report.guaranteed_constant = c / (1.0 - std::pow(2.0, 0.5 - r_exp));
  for (std::size_t s = 2; s <= mags.size(); ++s) {
    const double ratio = tail[s] / std::pow(static_cast<double>(s), 0.5 - r_exp);
    report.implied_d = std::max(report.implied_d, ratio);
  }
  report.holds = std::isfinite(report.implied_d);
  return report;
}

}  // namespace debiased
