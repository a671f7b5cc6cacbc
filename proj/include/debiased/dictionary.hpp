#pragma once

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace debiased {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Rows W_i = (y_i, z_i, x_i). `z` is the auxiliary variable of the average
/// product; for treatment effects the treatment is one of the x columns.
struct Dataset {
  VectorXd y;
  std::optional<VectorXd> z;
  MatrixXd x;
  std::vector<std::string> x_names;
  std::optional<Index> treatment_column;

  Index n() const { return y.size(); }
  Index input_dim() const { return x.cols(); }

  /// Checks shapes, finiteness, n >= 2 and a {0,1} treatment column.
  void validate() const;
};

struct Observation {
  double y = 0.0;
  std::optional<double> z;
  VectorXd x;
};

Observation observation(const Dataset& data, Index i);

/// All row indices 0..n-1.
std::vector<Index> all_rows(const Dataset& data);

/// Dictionary b(x) = (b_1(x), ..., b_p(x)).
class Dictionary {
 public:
  enum class Kind { RawCoordinates, Custom };
  using Basis = std::function<void(const Eigen::Ref<const VectorXd>& x, Eigen::Ref<VectorXd> out)>;

  /// b_j(x) = x_j.
  static Dictionary raw(Index input_dim);
  static Dictionary custom(Index input_dim, Index size, Basis basis,
                           double bound = std::numeric_limits<double>::infinity(),
                           std::string name = "custom");
  /// (1, x_1, ..., x_d).
  static Dictionary intercept(Index input_dim);
  /// (1, x_1..x_d, x_1^2..x_d^2, ..., x_1^degree..x_d^degree).
  static Dictionary polynomial(Index input_dim, int degree);

  Kind kind() const { return kind_; }
  Index size() const { return size_; }
  Index input_dim() const { return input_dim_; }
  double bound() const { return bound_; }
  const std::string& name() const { return name_; }

  VectorXd eval(const Eigen::Ref<const VectorXd>& x) const;

  /// Row i of the result is b(x.row(i)).
  MatrixXd design(const Eigen::Ref<const MatrixXd>& x) const;

  /// Divides b_j by scales(j). Use with `rms_scales` for in-sample
  /// standardization (off unless requested).
  Dictionary scaled(const VectorXd& scales) const;

  /// True when `design(x)` is x itself (raw coordinates, unscaled).
  bool is_identity() const { return kind_ == Kind::RawCoordinates && !scales_; }

 private:
  Dictionary() = default;

  Kind kind_ = Kind::RawCoordinates;
  Index input_dim_ = 0;
  Index size_ = 0;
  Basis basis_;
  double bound_ = std::numeric_limits<double>::infinity();
  std::string name_;
  std::optional<VectorXd> scales_;
};

/// Sample root mean square of each dictionary column over the data.
VectorXd rms_scales(const Dictionary& dict, const Dataset& data);

// ---------------------------------------------------------------------------
// functionals m(W, rho)

/// Weight density omega on a bounded support together with its score
/// S(u) = -omega'(u) / omega(u).
struct Density {
  std::function<double(double)> pdf;
  double lower = 0.0;
  double upper = 0.0;
  /// Analytic score when known; otherwise central differences are used.
  std::function<double(double)> score;

  /// N(mean, sd^2) truncated to mean +- 6 sd, with analytic score.
  static Density normal(double mean = 0.0, double sd = 1.0);
};

struct AverageProduct {};

/// m(w, rho) = integral of S(u) rho(u, rest of x) omega(u) du, where u is
/// x(column). The observed value of x(column) does not enter.
struct WeightedAverageDerivative {
  Index column = 0;
  Density omega = Density::normal();
  /// Overrides the score derived from omega.
  std::function<double(double)> score;
  Index grid_points = 401;
};

struct AverageTreatmentEffect {
  Index treatment_column = 0;
};

struct CustomFunctional {
  using Rho = std::function<double(const VectorXd& x)>;
  /// Must be linear in rho.
  std::function<double(const Observation& w, const Rho& rho)> evaluate;
};

using FunctionalSpec =
    std::variant<AverageProduct, WeightedAverageDerivative, AverageTreatmentEffect, CustomFunctional>;

/// Trapezoid nodes over omega's support with combined weights
/// w_k S(u_k) omega(u_k). Throws QuadratureGridEmpty for fewer than two
/// points and InvalidArgs when omega does not integrate to one within 1e-6.
struct Quadrature {
  VectorXd nodes;
  VectorXd weights;
};
Quadrature make_quadrature(const WeightedAverageDerivative& wad);

/// m(w, b'coeffs).
double eval_m(const FunctionalSpec& functional, const Dictionary& dict, const Observation& w,
              const VectorXd& coeffs);

/// Row i is m(W_i, b) = (m(W_i, b_1), ..., m(W_i, b_p)) for the given rows.
MatrixXd functional_design(const FunctionalSpec& functional, const Dictionary& dict,
                           const Dataset& data, std::span<const Index> rows);

// ---------------------------------------------------------------------------
// sample moments

MatrixXd second_moment(const Dictionary& dict, const Dataset& data, std::span<const Index> rows);
VectorXd cross_moment_y(const Dictionary& dict, const Dataset& data, std::span<const Index> rows);
/// Mean over the rows of m(W_i, b); for the average product this is the
/// mean of b(X_i) z_i.
VectorXd riesz_target(const FunctionalSpec& functional, const Dictionary& dict, const Dataset& data,
                      std::span<const Index> rows);

struct MomentSet {
  MatrixXd sigma_hat;
  VectorXd mu_hat;
  VectorXd m_hat;
  Index n_sigma = 0;
  Index n_mu = 0;
  Index n_m = 0;
};

/// Sigma from `sigma_rows`, mu and M from `cross_rows` (equal sets give the
/// full-sample moments; disjoint sets give the split-sample ones).
MomentSet compute_moments(const FunctionalSpec& functional, const Dictionary& dict,
                          const Dataset& data, std::span<const Index> sigma_rows,
                          std::span<const Index> cross_rows);

/// Checks that `functional` can be evaluated on `data` (z present for the
/// average product, treatment column in range and binary for the ATE).
void check_compatible(const FunctionalSpec& functional, const Dictionary& dict, const Dataset& data);

}  // namespace debiased
