#pragma once

// Approximately sparse coefficient vectors: v belongs to the class with
// constant C and exponent xi when, for every t >= 1, the best t-sparse
// approximation of v misses by at most C t^{-xi} in the l2 norm. The vector
// norm is used throughout, which matches the function-space definition when
// the dictionary second moment matrix is the identity.

#include <Eigen/Dense>

#include <cstdint>
#include <optional>

namespace debiased {

using Eigen::Index;
using Eigen::VectorXd;

enum class SparsityStyle { PowerLawDecay, PermutedPowerLaw, ExactKSparse };

struct SparseApproxSpec {
  double xi = 1.0;
  double c = 1.0;
  SparsityStyle style = SparsityStyle::PowerLawDecay;
  /// ExactKSparse only.
  Index k = 1;
  double magnitude = 1.0;
};

/// power_law_decay: v_j = a j^{-(xi + 1/2)} with a chosen so the worst ratio
/// against C t^{-xi} is just below one. permuted_power_law: the same values
/// with a seeded permutation and random signs. exact_k_sparse: k entries of
/// the given magnitude at seeded positions.
VectorXd make_coeffs(Index p, const SparseApproxSpec& spec, std::uint64_t seed);

/// l2 norm of v with its t largest-magnitude entries removed (ties keep the
/// lower index).
double approx_error_l2(const VectorXd& v, Index t);

struct MembershipReport {
  bool member = false;
  Index worst_t = 1;
  /// max over t of approx_error_l2(v, t) / (c t^{-xi}).
  double worst_ratio = 0.0;
  /// Verdict restricted to t <= t_max, when a bound was given.
  std::optional<bool> member_truncated;
};

MembershipReport check_membership(const VectorXd& v, double c, double xi,
                                  std::optional<Index> t_max = std::nullopt);

/// Smallest C for which v is a member with exponent xi.
double certified_constant(const VectorXd& v, double xi);

/// floor(c (ln p / n)^{-2/(2 xi + 1)}), the largest sparsity level the
/// rate-restricted membership condition looks at.
Index truncated_sparsity_level(double c, double xi, Index p, Index n);

struct TailBoundReport {
  bool holds = false;
  /// max over s in {2..p} of |v - v_s|_1 / s^{1/2 - r}.
  double implied_d = 0.0;
  /// c / (1 - 2^{1/2 - r}), the bound membership guarantees for implied_d.
  double guaranteed_constant = 0.0;
};

/// Requires membership of v with constant c and exponent r_exp > 1/2
/// (PreconditionViolated otherwise).
TailBoundReport tail_l1_bound_check(const VectorXd& v, double c, double r_exp);

}  // namespace debiased
