#include "debiased/dictionary.hpp"

#include <cmath>
#include <numeric>
#include <type_traits>

#include "debiased/errors.hpp"

namespace debiased {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_rows(std::span<const Index> rows, Index n) {
  require(!rows.empty(), ErrorKind::EmptySubset, "row subset is empty");
  for (Index i : rows) {
    require(i >= 0 && i < n, ErrorKind::DimensionMismatch,
            "row index " + std::to_string(i) + " outside dataset of " + std::to_string(n) + " rows");
  }
}

MatrixXd subset_rows(const MatrixXd& x, std::span<const Index> rows) {
  MatrixXd out(static_cast<Index>(rows.size()), x.cols());
  for (Index c = 0; c < x.cols(); ++c) {
    for (std::size_t k = 0; k < rows.size(); ++k) out(static_cast<Index>(k), c) = x(rows[k], c);
  }
  return out;
}

double score_at(const WeightedAverageDerivative& wad, double u) {
  if (wad.score) return wad.score(u);
  if (wad.omega.score) return wad.omega.score(u);
  constexpr double h = 1e-5;
  const double density = wad.omega.pdf(u);
  if (density <= 0.0) return 0.0;
  return -(wad.omega.pdf(u + h) - wad.omega.pdf(u - h)) / (2.0 * h) / density;
}

}  // namespace

// ---------------------------------------------------------------------------
// Dataset

void Dataset::validate() const {
  const Index rows = y.size();
  require(rows >= 2, ErrorKind::TooFewRows, "dataset needs at least 2 rows, got " + std::to_string(rows));
  require(x.rows() == rows, ErrorKind::DimensionMismatch,
          "x has " + std::to_string(x.rows()) + " rows but y has " + std::to_string(rows));
  require(x.cols() >= 1, ErrorKind::DimensionMismatch, "x has no columns");
  require(y.allFinite(), ErrorKind::InvalidArgs, "y contains non-finite values");
  require(x.allFinite(), ErrorKind::InvalidArgs, "x contains non-finite values");
  if (z) {
    require(z->size() == rows, ErrorKind::DimensionMismatch, "z length differs from y");
    require(z->allFinite(), ErrorKind::InvalidArgs, "z contains non-finite values");
  }
  if (!x_names.empty()) {
    require(static_cast<Index>(x_names.size()) == x.cols(), ErrorKind::DimensionMismatch,
            "x_names length differs from the number of x columns");
  }
  if (treatment_column) {
    const Index t = *treatment_column;
    require(t >= 0 && t < x.cols(), ErrorKind::MissingColumn, "treatment column out of range");
    for (Index i = 0; i < rows; ++i) {
      require(x(i, t) == 0.0 || x(i, t) == 1.0, ErrorKind::InvalidArgs,
              "treatment column must be 0/1 (row " + std::to_string(i) + ")");
    }
  }
}

Observation observation(const Dataset& data, Index i) {
  Observation w;
  w.y = data.y(i);
  if (data.z) w.z = (*data.z)(i);
  w.x = data.x.row(i).transpose();
  return w;
}

std::vector<Index> all_rows(const Dataset& data) {
  std::vector<Index> rows(static_cast<std::size_t>(data.n()));
  std::iota(rows.begin(), rows.end(), Index{0});
  return rows;
}

// ---------------------------------------------------------------------------
// Dictionary

Dictionary Dictionary::raw(Index input_dim) {
  require(input_dim >= 1, ErrorKind::InvalidArgs, "dictionary needs at least one function");
  Dictionary d;
  d.kind_ = Kind::RawCoordinates;
  d.input_dim_ = input_dim;
  d.size_ = input_dim;
  d.name_ = "raw";
  return d;
}

Dictionary Dictionary::custom(Index input_dim, Index size, Basis basis, double bound, std::string name) {
  require(input_dim >= 1 && size >= 1, ErrorKind::InvalidArgs, "dictionary needs at least one function");
  require(static_cast<bool>(basis), ErrorKind::InvalidArgs, "custom dictionary needs a basis");
  Dictionary d;
  d.kind_ = Kind::Custom;
  d.input_dim_ = input_dim;
  d.size_ = size;
  d.basis_ = std::move(basis);
  d.bound_ = bound;
  d.name_ = std::move(name);
  return d;
}

Dictionary Dictionary::intercept(Index input_dim) {
  return custom(
      input_dim, input_dim + 1,
      [](const Eigen::Ref<const VectorXd>& x, Eigen::Ref<VectorXd> out) {
        out(0) = 1.0;
        out.tail(x.size()) = x;
      },
      std::numeric_limits<double>::infinity(), "intercept");
}

Dictionary Dictionary::polynomial(Index input_dim, int degree) {
  require(degree >= 1, ErrorKind::InvalidArgs, "polynomial degree must be at least 1");
  return custom(
      input_dim, 1 + input_dim * degree,
      [input_dim, degree](const Eigen::Ref<const VectorXd>& x, Eigen::Ref<VectorXd> out) {
        out(0) = 1.0;
        VectorXd power = VectorXd::Ones(input_dim);
        for (int k = 0; k < degree; ++k) {
          power = power.cwiseProduct(x);
          out.segment(1 + k * input_dim, input_dim) = power;
        }
      },
      std::numeric_limits<double>::infinity(), "poly:" + std::to_string(degree));
}

VectorXd Dictionary::eval(const Eigen::Ref<const VectorXd>& x) const {
  require(x.size() == input_dim_, ErrorKind::DimensionMismatch,
          "covariate row has dimension " + std::to_string(x.size()) + ", dictionary expects " +
              std::to_string(input_dim_));
  VectorXd out(size_);
  if (kind_ == Kind::RawCoordinates) {
    out = x;
  } else {
    basis_(x, out);
  }
  if (scales_) out = out.cwiseQuotient(*scales_);
  require(out.allFinite(), ErrorKind::InvalidArgs, "dictionary produced a non-finite value");
  return out;
}

MatrixXd Dictionary::design(const Eigen::Ref<const MatrixXd>& x) const {
  require(x.cols() == input_dim_, ErrorKind::DimensionMismatch,
          "covariates have " + std::to_string(x.cols()) + " columns, dictionary expects " +
              std::to_string(input_dim_));
  MatrixXd out(x.rows(), size_);
  if (kind_ == Kind::RawCoordinates) {
    out = x;
  } else {
    VectorXd row(input_dim_);
    VectorXd values(size_);
    for (Index i = 0; i < x.rows(); ++i) {
      row = x.row(i).transpose();
      basis_(row, values);
      out.row(i) = values.transpose();
    }
  }
  if (scales_) out = out * scales_->cwiseInverse().asDiagonal();
  require(out.allFinite(), ErrorKind::InvalidArgs, "dictionary produced a non-finite value");
  return out;
}

Dictionary Dictionary::scaled(const VectorXd& scales) const {
  require(scales.size() == size_, ErrorKind::DimensionMismatch, "scale vector length differs from p");
  require((scales.array() > 0.0).all(), ErrorKind::InvalidArgs, "scales must be positive");
  Dictionary d = *this;
  d.scales_ = d.scales_ ? VectorXd(d.scales_->cwiseProduct(scales)) : scales;
  return d;
}

VectorXd rms_scales(const Dictionary& dict, const Dataset& data) {
  const MatrixXd b = dict.design(data.x);
  VectorXd scales = (b.colwise().squaredNorm().transpose() / static_cast<double>(b.rows())).cwiseSqrt();
  for (Index j = 0; j < scales.size(); ++j) {
    if (scales(j) <= 0.0) scales(j) = 1.0;
  }
  return scales;
}

// ---------------------------------------------------------------------------
// functionals

Density Density::normal(double mean, double sd) {
  require(sd > 0.0, ErrorKind::InvalidArgs, "normal density needs sd > 0");
  Density d;
  d.pdf = [mean, sd](double u) {
    const double t = (u - mean) / sd;
    return std::exp(-0.5 * t * t) / (sd * std::sqrt(2.0 * M_PI));
  };
  d.score = [mean, sd](double u) { return (u - mean) / (sd * sd); };
  d.lower = mean - 6.0 * sd;
  d.upper = mean + 6.0 * sd;
  return d;
}

Quadrature make_quadrature(const WeightedAverageDerivative& wad) {
  require(wad.grid_points >= 2, ErrorKind::QuadratureGridEmpty,
          "quadrature grid needs at least 2 points, got " + std::to_string(wad.grid_points));
  require(static_cast<bool>(wad.omega.pdf) && wad.omega.upper > wad.omega.lower, ErrorKind::InvalidArgs,
          "weight density needs a pdf and a nonempty support");
  const Index k = wad.grid_points;
  const double h = (wad.omega.upper - wad.omega.lower) / static_cast<double>(k - 1);
  Quadrature q;
  q.nodes.resize(k);
  q.weights.resize(k);
  double mass = 0.0;
  for (Index i = 0; i < k; ++i) {
    const double u = wad.omega.lower + h * static_cast<double>(i);
    const double trap = (i == 0 || i == k - 1) ? 0.5 * h : h;
    const double density = wad.omega.pdf(u);
    mass += trap * density;
    q.nodes(i) = u;
    q.weights(i) = trap * density * score_at(wad, u);
  }
  require(std::abs(mass - 1.0) <= 1e-6, ErrorKind::InvalidArgs,
          "weight density integrates to " + std::to_string(mass) + " on its grid, expected 1");
  return q;
}

void check_compatible(const FunctionalSpec& functional, const Dictionary& dict, const Dataset& data) {
  require(data.x.cols() == dict.input_dim(), ErrorKind::DimensionMismatch,
          "dataset has " + std::to_string(data.x.cols()) + " covariates, dictionary expects " +
              std::to_string(dict.input_dim()));
  std::visit(overloaded{
                 [&](const AverageProduct&) {
                   require(data.z.has_value(), ErrorKind::MissingColumn,
                           "average product needs the z column");
                 },
                 [&](const AverageTreatmentEffect& ate) {
                   const Index t = ate.treatment_column;
                   require(t >= 0 && t < data.x.cols(), ErrorKind::MissingColumn,
                           "treatment column " + std::to_string(t) + " not present");
                   for (Index i = 0; i < data.n(); ++i) {
                     require(data.x(i, t) == 0.0 || data.x(i, t) == 1.0, ErrorKind::InvalidArgs,
                             "treatment column must be 0/1 (row " + std::to_string(i) + ")");
                   }
                 },
                 [&](const WeightedAverageDerivative& wad) {
                   require(wad.column >= 0 && wad.column < data.x.cols(), ErrorKind::MissingColumn,
                           "derivative column " + std::to_string(wad.column) + " not present");
                 },
                 [&](const CustomFunctional& custom) {
                   require(static_cast<bool>(custom.evaluate), ErrorKind::InvalidArgs,
                           "custom functional has no evaluator");
                 },
             },
             functional);
}

double eval_m(const FunctionalSpec& functional, const Dictionary& dict, const Observation& w,
              const VectorXd& coeffs) {
  require(coeffs.size() == dict.size(), ErrorKind::DimensionMismatch,
          "coefficient vector length differs from dictionary size");
  auto rho = [&](const VectorXd& x) { return dict.eval(x).dot(coeffs); };
  return std::visit(
      overloaded{
          [&](const AverageProduct&) {
            require(w.z.has_value(), ErrorKind::MissingColumn, "average product needs z");
            return *w.z * rho(w.x);
          },
          [&](const AverageTreatmentEffect& ate) {
            require(ate.treatment_column >= 0 && ate.treatment_column < w.x.size(),
                    ErrorKind::MissingColumn, "treatment column not present");
            VectorXd treated = w.x;
            VectorXd control = w.x;
            treated(ate.treatment_column) = 1.0;
            control(ate.treatment_column) = 0.0;
            return rho(treated) - rho(control);
          },
          [&](const WeightedAverageDerivative& wad) {
            require(wad.column >= 0 && wad.column < w.x.size(), ErrorKind::MissingColumn,
                    "derivative column not present");
            const Quadrature q = make_quadrature(wad);
            VectorXd x = w.x;
            double total = 0.0;
            for (Index k = 0; k < q.nodes.size(); ++k) {
              x(wad.column) = q.nodes(k);
              total += q.weights(k) * rho(x);
            }
            return total;
          },
          [&](const CustomFunctional& custom) {
            require(static_cast<bool>(custom.evaluate), ErrorKind::InvalidArgs,
                    "custom functional has no evaluator");
            return custom.evaluate(w, rho);
          },
      },
      functional);
}

MatrixXd functional_design(const FunctionalSpec& functional, const Dictionary& dict,
                           const Dataset& data, std::span<const Index> rows) {
  require_rows(rows, data.n());
  check_compatible(functional, dict, data);
  const MatrixXd x = subset_rows(data.x, rows);
  const Index count = x.rows();
  return std::visit(
      overloaded{
          [&](const AverageProduct&) -> MatrixXd {
            VectorXd z(count);
            for (Index k = 0; k < count; ++k) z(k) = (*data.z)(rows[static_cast<std::size_t>(k)]);
            return z.asDiagonal() * dict.design(x);
          },
          [&](const AverageTreatmentEffect& ate) -> MatrixXd {
            MatrixXd treated = x;
            MatrixXd control = x;
            treated.col(ate.treatment_column).setOnes();
            control.col(ate.treatment_column).setZero();
            return dict.design(treated) - dict.design(control);
          },
          [&](const WeightedAverageDerivative& wad) -> MatrixXd {
            const Quadrature q = make_quadrature(wad);
            MatrixXd out = MatrixXd::Zero(count, dict.size());
            MatrixXd shifted = x;
            for (Index k = 0; k < q.nodes.size(); ++k) {
              shifted.col(wad.column).setConstant(q.nodes(k));
              out += q.weights(k) * dict.design(shifted);
            }
            return out;
          },
          [&](const CustomFunctional& custom) -> MatrixXd {
            MatrixXd out(count, dict.size());
            for (Index k = 0; k < count; ++k) {
              const Observation w = observation(data, rows[static_cast<std::size_t>(k)]);
              for (Index j = 0; j < dict.size(); ++j) {
                auto basis_j = [&](const VectorXd& xx) { return dict.eval(xx)(j); };
                out(k, j) = custom.evaluate(w, basis_j);
              }
            }
            return out;
          },
      },
      functional);
}

// ---------------------------------------------------------------------------
// moments

MatrixXd second_moment(const Dictionary& dict, const Dataset& data, std::span<const Index> rows) {
  require_rows(rows, data.n());
  const MatrixXd b = dict.design(subset_rows(data.x, rows));
  MatrixXd sigma = (b.transpose() * b) / static_cast<double>(b.rows());
  return 0.5 * (sigma + sigma.transpose());
}

VectorXd cross_moment_y(const Dictionary& dict, const Dataset& data, std::span<const Index> rows) {
  require_rows(rows, data.n());
  const MatrixXd b = dict.design(subset_rows(data.x, rows));
  VectorXd y(b.rows());
  for (Index k = 0; k < b.rows(); ++k) y(k) = data.y(rows[static_cast<std::size_t>(k)]);
  return b.transpose() * y / static_cast<double>(b.rows());
}

VectorXd riesz_target(const FunctionalSpec& functional, const Dictionary& dict, const Dataset& data,
                      std::span<const Index> rows) {
  const MatrixXd f = functional_design(functional, dict, data, rows);
  return f.colwise().sum().transpose() / static_cast<double>(f.rows());
}

MomentSet compute_moments(const FunctionalSpec& functional, const Dictionary& dict,
                          const Dataset& data, std::span<const Index> sigma_rows,
                          std::span<const Index> cross_rows) {
  MomentSet m;
  m.sigma_hat = second_moment(dict, data, sigma_rows);
  m.mu_hat = cross_moment_y(dict, data, cross_rows);
  m.m_hat = riesz_target(functional, dict, data, cross_rows);
  m.n_sigma = static_cast<Index>(sigma_rows.size());
  m.n_mu = static_cast<Index>(cross_rows.size());
  m.n_m = static_cast<Index>(cross_rows.size());
  return m;
}

}  // namespace debiased
