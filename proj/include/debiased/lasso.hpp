#pragma once

// Generalized Lasso on a quadratic form:
//
//     minimize  v' S v - 2 m' v + 2 r |v|_1
//
// The same program produces both the regression learner (m = cross moment of
// the outcome) and the Riesz-representer learner (m = the functional applied
// to the dictionary), so S is shared and only the target changes.
//
// Two representations of S are supported: an explicit symmetric matrix, and a
// design matrix D with S = D'D / rows(D) held implicitly. The second never
// forms the p x p matrix, which is what makes p in the tens of thousands
// feasible.
//
// The solver is cyclic coordinate descent in ascending index order with exact
// coordinate minimization, stopped on the first-order (KKT) residual. When S
// is singular the minimizer may not be unique; the solver returns the KKT
// point reached from the given initialization (zero by default).

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "debiased/errors.hpp"

namespace debiased {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// sign(z) * max(|z| - t, 0). Ties at |z| == t map to zero.
template <typename Scalar>
constexpr Scalar soft_threshold(Scalar z, Scalar t) noexcept {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return Scalar(0);
}

template <typename ScalarT>
struct PenalizedQuadraticProblem {
  using Scalar = ScalarT;
  using Vector = VectorX<Scalar>;

  MatrixX<Scalar> sigma;
  VectorX<Scalar> target;
  Scalar penalty = Scalar(0);

  Eigen::Index dim() const { return target.size(); }
};

/// The quadratic form is design' * design / design.rows().
template <typename ScalarT>
struct GramPenalizedProblem {
  using Scalar = ScalarT;
  using Vector = VectorX<Scalar>;

  Eigen::Ref<const MatrixX<Scalar>> design;
  VectorX<Scalar> target;
  Scalar penalty = Scalar(0);

  Eigen::Index dim() const { return target.size(); }
};

template <typename Scalar>
struct SolveOptions {
  Scalar tol = Scalar(1e-8);
  /// Maximum number of coordinate sweeps; 0 selects 100 * p.
  std::size_t max_iter = 0;
  std::optional<VectorX<Scalar>> init;
  /// Record the objective after every sweep (used by descent checks).
  bool record_trace = false;
  /// After convergence, solve the active-set equations exactly.
  bool polish = true;
  std::size_t polish_max_support = 512;
};

template <typename Scalar>
struct LassoSolution {
  VectorX<Scalar> coeffs;
  Scalar objective = Scalar(0);
  std::size_t iterations = 0;
  Scalar kkt_residual = Scalar(0);
  std::vector<Eigen::Index> active_set;
  /// False when max_iter was exhausted with kkt_residual > tol.
  bool converged = false;
  std::vector<Scalar> trace;
};

template <typename Scalar>
struct KktReport {
  bool passed = false;
  Scalar max_violation = Scalar(0);
  VectorX<Scalar> per_coordinate;
};

// ---------------------------------------------------------------------------
// validation

template <typename Scalar>
void validate(const PenalizedQuadraticProblem<Scalar>& problem) {
  const auto p = problem.target.size();
  require(p >= 1, ErrorKind::DimensionMismatch, "problem dimension must be at least 1");
  require(problem.sigma.rows() == p && problem.sigma.cols() == p, ErrorKind::DimensionMismatch,
          "sigma is " + std::to_string(problem.sigma.rows()) + "x" +
              std::to_string(problem.sigma.cols()) + " but target has length " + std::to_string(p));
  require(problem.penalty >= Scalar(0), ErrorKind::InvalidArgs, "penalty must be nonnegative");
  const Scalar scale = std::max(Scalar(1), problem.sigma.cwiseAbs().maxCoeff());
  const Scalar asym = (problem.sigma - problem.sigma.transpose()).cwiseAbs().maxCoeff();
  require(asym <= Scalar(1e-12) * scale, ErrorKind::InvalidArgs, "sigma is not symmetric");
}

template <typename Scalar>
void validate(const GramPenalizedProblem<Scalar>& problem) {
  const auto p = problem.target.size();
  require(p >= 1, ErrorKind::DimensionMismatch, "problem dimension must be at least 1");
  require(problem.design.rows() >= 1, ErrorKind::DimensionMismatch, "design has no rows");
  require(problem.design.cols() == p, ErrorKind::DimensionMismatch,
          "design has " + std::to_string(problem.design.cols()) + " columns but target has length " +
              std::to_string(p));
  require(problem.penalty >= Scalar(0), ErrorKind::InvalidArgs, "penalty must be nonnegative");
}

namespace detail {

template <typename Scalar>
void check_coeffs(Eigen::Index p, const VectorX<Scalar>& coeffs) {
  require(coeffs.size() == p, ErrorKind::DimensionMismatch,
          "coefficient vector has length " + std::to_string(coeffs.size()) + ", expected " +
              std::to_string(p));
}

template <typename Scalar>
VectorX<Scalar> sigma_times(const PenalizedQuadraticProblem<Scalar>& problem,
                            const VectorX<Scalar>& v) {
  return problem.sigma * v;
}

// Sparse-aware product: D v is accumulated over nonzero coordinates in
// ascending order, and skipped entirely at v = 0.
template <typename Scalar>
VectorX<Scalar> sigma_times(const GramPenalizedProblem<Scalar>& problem,
                            const VectorX<Scalar>& v) {
  const auto& d = problem.design;
  VectorX<Scalar> fitted = VectorX<Scalar>::Zero(d.rows());
  bool any = false;
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (v(j) != Scalar(0)) {
      fitted.noalias() += v(j) * d.col(j);
      any = true;
    }
  }
  if (!any) return VectorX<Scalar>::Zero(v.size());
  return (d.transpose() * fitted) / Scalar(d.rows());
}

template <typename Scalar>
Scalar quadratic(const PenalizedQuadraticProblem<Scalar>& problem, const VectorX<Scalar>& v) {
  return v.dot(problem.sigma * v);
}

template <typename Scalar>
Scalar quadratic(const GramPenalizedProblem<Scalar>& problem, const VectorX<Scalar>& v) {
  return (problem.design * v).squaredNorm() / Scalar(problem.design.rows());
}

// Objective accumulated in long double, for sweep traces. Plain evaluation
// loses ~1e-13 absolute once coefficients are large, which would mask the
// descent property the trace is meant to show.
template <typename Scalar>
Scalar objective_extended(const PenalizedQuadraticProblem<Scalar>& problem, const VectorX<Scalar>& v) {
  using Wide = long double;
  Wide total = 0;
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (v(j) == Scalar(0)) continue;
    Wide row = 0;
    for (Eigen::Index k = 0; k < v.size(); ++k) row += Wide(problem.sigma(j, k)) * Wide(v(k));
    total += Wide(v(j)) * (row - 2 * Wide(problem.target(j))) + 2 * Wide(problem.penalty) * std::abs(Wide(v(j)));
  }
  return static_cast<Scalar>(total);
}

template <typename Scalar>
Scalar objective_extended(const GramPenalizedProblem<Scalar>& problem, const VectorX<Scalar>& v) {
  using Wide = long double;
  const auto& d = problem.design;
  Wide quad = 0;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    Wide fit = 0;
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      if (v(j) != Scalar(0)) fit += Wide(d(i, j)) * Wide(v(j));
    }
    quad += fit * fit;
  }
  Wide total = quad / Wide(d.rows());
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    total += 2 * Wide(problem.penalty) * std::abs(Wide(v(j))) - 2 * Wide(problem.target(j)) * Wide(v(j));
  }
  return static_cast<Scalar>(total);
}

template <typename Scalar>
MatrixX<Scalar> support_block(const PenalizedQuadraticProblem<Scalar>& problem,
                              const std::vector<Eigen::Index>& support) {
  return problem.sigma(support, support);
}

template <typename Scalar>
MatrixX<Scalar> support_block(const GramPenalizedProblem<Scalar>& problem,
                              const std::vector<Eigen::Index>& support) {
  const MatrixX<Scalar> cols = problem.design(Eigen::all, support);
  return cols.transpose() * cols / Scalar(problem.design.rows());
}

template <typename Scalar>
VectorX<Scalar> diagonal(const PenalizedQuadraticProblem<Scalar>& problem) {
  return problem.sigma.diagonal();
}

template <typename Scalar>
VectorX<Scalar> diagonal(const GramPenalizedProblem<Scalar>& problem) {
  return problem.design.colwise().squaredNorm().transpose() / Scalar(problem.design.rows());
}

template <typename Scalar>
KktReport<Scalar> kkt_from_gradient(const VectorX<Scalar>& gradient, const VectorX<Scalar>& coeffs,
                                    const VectorX<Scalar>& diag, Scalar penalty, Scalar tol) {
  KktReport<Scalar> report;
  report.per_coordinate.resize(coeffs.size());
  for (Eigen::Index j = 0; j < coeffs.size(); ++j) {
    Scalar violation;
    if (diag(j) <= Scalar(0)) {
      // frozen coordinate: no in-sample variation, held at zero
      violation = Scalar(0);
    } else if (coeffs(j) > Scalar(0)) {
      violation = std::abs(gradient(j) + penalty);
    } else if (coeffs(j) < Scalar(0)) {
      violation = std::abs(gradient(j) - penalty);
    } else {
      violation = std::max(std::abs(gradient(j)) - penalty, Scalar(0));
    }
    report.per_coordinate(j) = violation;
  }
  report.max_violation = coeffs.size() > 0 ? report.per_coordinate.maxCoeff() : Scalar(0);
  report.passed = report.max_violation <= tol;
  return report;
}

template <typename Problem>
KktReport<typename Problem::Scalar> kkt_with_diagonal(const Problem& problem,
                                                      const typename Problem::Vector& coeffs,
                                                      const typename Problem::Vector& diag,
                                                      typename Problem::Scalar tol) {
  const typename Problem::Vector gradient = sigma_times(problem, coeffs) - problem.target;
  return kkt_from_gradient(gradient, coeffs, diag, problem.penalty, tol);
}

// Incremental state for S v during coordinate descent, one per representation.

template <typename Scalar>
class DenseState {
 public:
  explicit DenseState(const PenalizedQuadraticProblem<Scalar>& problem) : sigma_(problem.sigma) {}

  void reset(const VectorX<Scalar>& v) { product_ = sigma_ * v; }
  Scalar row_dot(Eigen::Index j) const { return product_(j); }
  void update(Eigen::Index j, Scalar delta) { product_.noalias() += delta * sigma_.col(j); }

 private:
  const MatrixX<Scalar>& sigma_;
  VectorX<Scalar> product_;
};

template <typename Scalar>
class GramState {
 public:
  explicit GramState(const GramPenalizedProblem<Scalar>& problem)
      : design_(problem.design), inv_rows_(Scalar(1) / Scalar(problem.design.rows())) {}

  void reset(const VectorX<Scalar>& v) {
    fitted_ = VectorX<Scalar>::Zero(design_.rows());
    zero_ = true;
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      if (v(j) != Scalar(0)) {
        fitted_.noalias() += v(j) * design_.col(j);
        zero_ = false;
      }
    }
  }
  Scalar row_dot(Eigen::Index j) const {
    if (zero_) return Scalar(0);
    return design_.col(j).dot(fitted_) * inv_rows_;
  }
  void update(Eigen::Index j, Scalar delta) {
    fitted_.noalias() += delta * design_.col(j);
    zero_ = false;
  }

 private:
  const Eigen::Ref<const MatrixX<Scalar>>& design_;
  Scalar inv_rows_;
  VectorX<Scalar> fitted_;
  bool zero_ = true;
};

template <typename Problem>
struct StateFor;
template <typename Scalar>
struct StateFor<PenalizedQuadraticProblem<Scalar>> {
  using type = DenseState<Scalar>;
};
template <typename Scalar>
struct StateFor<GramPenalizedProblem<Scalar>> {
  using type = GramState<Scalar>;
};

}  // namespace detail

/// v'Sv - 2m'v + 2r|v|_1.
template <typename Problem>
typename Problem::Scalar objective(const Problem& problem, const typename Problem::Vector& coeffs) {
  using Scalar = typename Problem::Scalar;
  validate(problem);
  detail::check_coeffs(problem.dim(), coeffs);
  return detail::quadratic(problem, coeffs) - Scalar(2) * problem.target.dot(coeffs) +
         Scalar(2) * problem.penalty * coeffs.template lpNorm<1>();
}

/// First-order conditions: (S v - m)_j + r sign(v_j) = 0 on the active set and
/// |(S v - m)_j| <= r elsewhere. Coordinates with S_jj = 0 are frozen at zero
/// by the solver and report no violation.
template <typename Problem>
KktReport<typename Problem::Scalar> kkt_check(const Problem& problem,
                                              const typename Problem::Vector& coeffs,
                                              typename Problem::Scalar tol) {
  validate(problem);
  detail::check_coeffs(problem.dim(), coeffs);
  return detail::kkt_with_diagonal(problem, coeffs, detail::diagonal(problem), tol);
}

template <typename Problem>
LassoSolution<typename Problem::Scalar> solve(const Problem& problem,
                                              const SolveOptions<typename Problem::Scalar>& opts = {}) {
  using Scalar = typename Problem::Scalar;
  using Index = Eigen::Index;
  validate(problem);
  const Index p = problem.dim();
  const VectorX<Scalar> diag = detail::diagonal(problem);
  const Scalar r = problem.penalty;
  const std::size_t max_sweeps = opts.max_iter > 0 ? opts.max_iter : 100 * static_cast<std::size_t>(p);

  LassoSolution<Scalar> sol;
  if (opts.init) {
    detail::check_coeffs(p, *opts.init);
    sol.coeffs = *opts.init;
  } else {
    sol.coeffs = VectorX<Scalar>::Zero(p);
  }
  for (Index j = 0; j < p; ++j) {
    if (diag(j) <= Scalar(0)) sol.coeffs(j) = Scalar(0);
  }
  VectorX<Scalar>& v = sol.coeffs;

  typename detail::StateFor<Problem>::type state(problem);

  auto update_coordinate = [&](Index j) {
    const Scalar djj = diag(j);
    if (djj <= Scalar(0)) return;
    const Scalar old = v(j);
    const Scalar z = (problem.target(j) - state.row_dot(j) + djj * old) / djj;
    const Scalar next = soft_threshold(z, r / djj);
    if (next != old) {
      state.update(j, next - old);
      v(j) = next;
    }
  };
  auto after_sweep = [&]() {
    ++sol.iterations;
    if (opts.record_trace) sol.trace.push_back(detail::objective_extended(problem, v));
  };

  std::optional<KktReport<Scalar>> kkt;
  std::vector<Index> active;
  while (sol.iterations < max_sweeps) {
    state.reset(v);
    for (Index j = 0; j < p; ++j) update_coordinate(j);
    after_sweep();

    kkt = detail::kkt_with_diagonal(problem, v, diag, opts.tol);
    if (kkt->passed) break;

    // Iterate on the current support until it is stationary, then return to a
    // full sweep which may admit new coordinates.
    active.clear();
    for (Index j = 0; j < p; ++j) {
      if (v(j) != Scalar(0)) active.push_back(j);
    }
    while (!active.empty() && sol.iterations < max_sweeps) {
      Scalar largest_step = Scalar(0);
      for (Index j : active) {
        const Scalar old = v(j);
        update_coordinate(j);
        largest_step = std::max(largest_step, std::abs(v(j) - old) * diag(j));
      }
      after_sweep();
      if (largest_step <= opts.tol * Scalar(0.25)) break;
    }
  }
  if (!kkt || !kkt->passed) kkt = detail::kkt_with_diagonal(problem, v, diag, opts.tol);

  // Polish: with the support and signs settled, the optimum solves
  // S_AA v_A = m_A - r sign(v_A) exactly. Kept only if signs and KKT survive.
  if (kkt->passed && opts.polish) {
    std::vector<Index> support;
    for (Index j = 0; j < p; ++j) {
      if (v(j) != Scalar(0)) support.push_back(j);
    }
    if (!support.empty() && support.size() <= opts.polish_max_support) {
      const MatrixX<Scalar> block = detail::support_block(problem, support);
      VectorX<Scalar> rhs(static_cast<Index>(support.size()));
      for (std::size_t a = 0; a < support.size(); ++a) {
        const Index j = support[a];
        rhs(static_cast<Index>(a)) = problem.target(j) - (v(j) > Scalar(0) ? r : -r);
      }
      const Eigen::LLT<MatrixX<Scalar>> llt(block);
      if (llt.info() == Eigen::Success) {
        const VectorX<Scalar> w = llt.solve(rhs);
        VectorX<Scalar> candidate = v;
        bool same_signs = w.allFinite();
        for (std::size_t a = 0; a < support.size() && same_signs; ++a) {
          const Scalar value = w(static_cast<Index>(a));
          same_signs = (value > Scalar(0)) == (v(support[a]) > Scalar(0)) && value != Scalar(0);
          candidate(support[a]) = value;
        }
        if (same_signs) {
          auto polished = detail::kkt_with_diagonal(problem, candidate, diag, opts.tol);
          if (polished.passed) {
            v = std::move(candidate);
            kkt = std::move(polished);
          }
        }
      }
    }
  }

  sol.kkt_residual = kkt->max_violation;
  sol.converged = kkt->passed;
  sol.objective = objective(problem, v);
  for (Index j = 0; j < p; ++j) {
    if (v(j) != Scalar(0)) sol.active_set.push_back(j);
  }
  return sol;
}

}  // namespace debiased
