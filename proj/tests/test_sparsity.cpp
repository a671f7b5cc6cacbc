#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "debiased/errors.hpp"
#include "debiased/sparsity.hpp"

using namespace debiased;

namespace {

// Literal evaluation: sort squares, add up everything after the first t.
double naive_tail_l2(const VectorXd& v, Index t) {
  std::vector<double> sq(v.data(), v.data() + v.size());
  for (double& x : sq) x *= x;
  std::sort(sq.begin(), sq.end(), std::greater<>());
  double total = 0.0;
  for (std::size_t j = static_cast<std::size_t>(t); j < sq.size(); ++j) total += sq[j];
  return std::sqrt(total);
}

double naive_certified_constant(const VectorXd& v, double xi) {
  double worst = 0.0;
  for (Index t = 1; t <= v.size(); ++t) worst = std::max(worst, naive_tail_l2(v, t) * std::pow(double(t), xi));
  return worst;
}

double naive_implied_d(const VectorXd& v, double r_exp) {
  std::vector<double> mags(static_cast<std::size_t>(v.size()));
  for (Index j = 0; j < v.size(); ++j) mags[static_cast<std::size_t>(j)] = std::abs(v(j));
  std::sort(mags.begin(), mags.end(), std::greater<>());
  double worst = 0.0;
  for (std::size_t s = 2; s <= mags.size(); ++s) {
    double tail = 0.0;
    for (std::size_t j = s; j < mags.size(); ++j) tail += mags[j];
    worst = std::max(worst, tail / std::pow(double(s), 0.5 - r_exp));
  }
  return worst;
}

VectorXd sorted_abs(VectorXd v) {
  v = v.cwiseAbs();
  std::sort(v.data(), v.data() + v.size());
  return v;
}

}  // namespace

TEST_CASE("make_coeffs examples") {
  SparseApproxSpec one_hot;
  one_hot.style = SparsityStyle::ExactKSparse;
  one_hot.k = 1;
  one_hot.magnitude = 1.0;
  const VectorXd e = make_coeffs(4, one_hot, 7);
  CHECK(e.sum() == 1.0);
  CHECK(e.cwiseAbs().maxCoeff() == 1.0);
  CHECK((e.array() != 0.0).count() == 1);

  SparseApproxSpec power;
  power.xi = 1.0;
  const VectorXd v = make_coeffs(100, power, 0);
  CHECK(check_membership(v, power.c, power.xi).member);
  for (Index j = 1; j < 100; ++j) CHECK(v(j) < v(j - 1));
  CHECK(v(9) / v(0) == doctest::Approx(std::pow(10.0, -1.5)));

  SparseApproxSpec permuted = power;
  permuted.style = SparsityStyle::PermutedPowerLaw;
  const VectorXd a = make_coeffs(100, permuted, 1);
  const VectorXd b = make_coeffs(100, permuted, 2);
  CHECK(sorted_abs(a) == sorted_abs(b));
  CHECK(a != b);
  CHECK(check_membership(a, 1.0, 1.0).member);
  CHECK(make_coeffs(100, permuted, 1) == a);
}

TEST_CASE("make_coeffs errors") {
  SparseApproxSpec spec;
  spec.style = SparsityStyle::ExactKSparse;
  spec.k = 3;
  spec.magnitude = 1.0;
  spec.c = 0.5;
  try {
    (void)make_coeffs(10, spec, 0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InfeasibleSpec);
  }
  spec.c = 10.0;
  spec.k = 11;
  CHECK_THROWS_AS((void)make_coeffs(10, spec, 0), Error);
  CHECK_THROWS_AS((void)make_coeffs(0, SparseApproxSpec{}, 0), Error);
  SparseApproxSpec bad;
  bad.xi = 0.0;
  CHECK_THROWS_AS((void)make_coeffs(5, bad, 0), Error);
}

TEST_CASE("approx_error_l2 examples") {
  const VectorXd v = Eigen::Vector3d(3, 2, 1);
  CHECK(approx_error_l2(v, 1) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-15));
  CHECK(approx_error_l2(v, 3) == 0.0);
  CHECK(approx_error_l2(v, 0) == doctest::Approx(std::sqrt(14.0)).epsilon(1e-15));

  VectorXd g(10);
  for (Index j = 0; j < 10; ++j) g(j) = std::pow(2.0, -(j + 1.0));
  // frozen from direct summation of 4^-j for j = 3..10
  CHECK(approx_error_l2(g, 2) == doctest::Approx(0.14433646608495904).epsilon(1e-14));
  CHECK(approx_error_l2(g, 2) == doctest::Approx(naive_tail_l2(g, 2)).epsilon(1e-14));

  // ties: removing either of two equal entries leaves the same error
  CHECK(approx_error_l2(Eigen::Vector3d(1, 1, 0.5), 1) == doctest::Approx(std::sqrt(1.25)));
  CHECK_THROWS_AS((void)approx_error_l2(v, 4), Error);
}

TEST_CASE("check_membership examples") {
  CHECK(check_membership(VectorXd::Zero(5), 0.1, 2.0).member);
  VectorXd unit = VectorXd::Zero(6);
  unit(2) = 1.0;
  CHECK(check_membership(unit, 1.0, 10.0).member);

  // flat vector: t = 1 is inside the bound, larger t are not
  const Index p = 64;
  const VectorXd flat = VectorXd::Constant(p, 1.0 / std::sqrt(double(p)));
  CHECK(approx_error_l2(flat, 1) == doctest::Approx(std::sqrt(63.0 / 64.0)));
  CHECK(approx_error_l2(flat, 1) <= 1.0);
  const auto report = check_membership(flat, 1.0, 1.0);
  CHECK_FALSE(report.member);
  // ratio t sqrt((64 - t) / 64) peaks at t = 43 over the integers
  CHECK(report.worst_t == 43);
  CHECK(report.worst_ratio == doctest::Approx(43.0 * std::sqrt(21.0 / 64.0)));
  const auto truncated = check_membership(flat, 1.0, 1.0, Index{1});
  REQUIRE(truncated.member_truncated.has_value());
  CHECK(*truncated.member_truncated);
  CHECK_FALSE(truncated.member);

  CHECK_THROWS_AS((void)check_membership(unit, 0.0, 1.0), Error);
  CHECK_THROWS_AS((void)check_membership(unit, 1.0, -1.0), Error);
}

TEST_CASE("tail_l1_bound_check examples") {
  VectorXd unit = VectorXd::Zero(8);
  unit(5) = 1.0;
  const auto u = tail_l1_bound_check(unit, 1.0, 1.0);
  CHECK(u.holds);
  CHECK(u.implied_d == 0.0);

  VectorXd inv_sq(200);
  for (Index j = 0; j < 200; ++j) inv_sq(j) = 1.0 / double((j + 1) * (j + 1));
  const double xi = 1.5;
  const double c = naive_certified_constant(inv_sq, xi);
  const auto q = tail_l1_bound_check(inv_sq, c * (1 + 1e-12), xi);
  CHECK(q.holds);
  CHECK(q.implied_d == doctest::Approx(naive_implied_d(inv_sq, xi)).epsilon(1e-12));
  CHECK(q.implied_d <= c / (1.0 - std::pow(2.0, 0.5 - xi)) + 1e-9);

  VectorXd geo(10);
  for (Index j = 0; j < 10; ++j) geo(j) = std::pow(2.0, -(j + 1.0));
  const double cg = naive_certified_constant(geo, 1.0);
  const auto gr = tail_l1_bound_check(geo, cg * (1 + 1e-12), 1.0);
  CHECK(gr.holds);
  CHECK(gr.implied_d == doctest::Approx(naive_implied_d(geo, 1.0)).epsilon(1e-12));

  try {
    (void)tail_l1_bound_check(VectorXd::Constant(64, 0.125), 1.0, 1.0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::PreconditionViolated);
  }
  CHECK_THROWS_AS((void)tail_l1_bound_check(unit, 1.0, 0.5), Error);
}

TEST_CASE("approx_error_l2 is nonincreasing with fixed endpoints") {
  std::mt19937 gen(3);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 30; ++trial) {
    const Index p = 1 + trial;
    VectorXd v(p);
    for (Index j = 0; j < p; ++j) v(j) = normal(gen);
    CHECK(approx_error_l2(v, 0) == doctest::Approx(v.norm()).epsilon(1e-14));
    CHECK(approx_error_l2(v, p) == 0.0);
    for (Index t = 1; t <= p; ++t) {
      CHECK(approx_error_l2(v, t) <= approx_error_l2(v, t - 1));
      CHECK(approx_error_l2(v, t) == doctest::Approx(naive_tail_l2(v, t)).epsilon(1e-12));
    }
  }
}

TEST_CASE("membership scales with the vector") {
  SparseApproxSpec spec;
  spec.xi = 0.8;
  spec.c = 2.0;
  const VectorXd v = make_coeffs(50, spec, 0);
  REQUIRE(check_membership(v, 2.0, 0.8).member);
  for (double s : {0.5, 2.0, 8.0}) {
    // powers of two keep the scaling exact in floating point
    CHECK(check_membership(s * v, s * 2.0, 0.8).member);
    CHECK(check_membership(s * v, s * 2.0, 0.8).worst_t == check_membership(v, 2.0, 0.8).worst_t);
  }
  std::mt19937 gen(8);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    VectorXd w(12);
    for (Index j = 0; j < 12; ++j) w(j) = normal(gen);
    const double c = naive_certified_constant(w, 1.0);
    for (double s : {0.25, 4.0}) {
      CHECK(check_membership(w, c * 1.000001, 1.0).member == check_membership(s * w, s * c * 1.000001, 1.0).member);
      CHECK(check_membership(w, c * 0.999999, 1.0).member == check_membership(s * w, s * c * 0.999999, 1.0).member);
    }
  }
}

TEST_CASE("membership is permutation invariant") {
  std::mt19937 gen(21);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    VectorXd v(15);
    for (Index j = 0; j < 15; ++j) v(j) = normal(gen) / (j + 1);
    const double c = naive_certified_constant(v, 0.7);
    std::vector<Index> perm(15);
    for (Index j = 0; j < 15; ++j) perm[static_cast<std::size_t>(j)] = j;
    std::shuffle(perm.begin(), perm.end(), gen);
    VectorXd w(15);
    for (Index j = 0; j < 15; ++j) w(perm[static_cast<std::size_t>(j)]) = -v(j);
    for (double cc : {0.5 * c, c * (1 + 1e-9), 2 * c}) {
      CHECK(check_membership(v, cc, 0.7).member == check_membership(w, cc, 0.7).member);
    }
    CHECK(certified_constant(w, 0.7) == certified_constant(v, 0.7));
  }
}

TEST_CASE("generated power laws satisfy the l1 tail bound") {
  for (double xi : {0.6, 0.75, 1.0, 1.5, 2.5}) {
    for (Index p : {10, 100, 1000}) {
      SparseApproxSpec spec;
      spec.xi = xi;
      for (auto style : {SparsityStyle::PowerLawDecay, SparsityStyle::PermutedPowerLaw}) {
        spec.style = style;
        const VectorXd v = make_coeffs(p, spec, 5);
        const double c = certified_constant(v, xi);
        CHECK(c == doctest::Approx(naive_certified_constant(v, xi)).epsilon(1e-12));
        const auto report = tail_l1_bound_check(v, c * (1 + 1e-12), xi);
        CHECK(report.holds);
        CHECK(report.implied_d <= c / (1.0 - std::pow(2.0, 0.5 - xi)) + 1e-9);
      }
    }
  }
}

TEST_CASE("truncated sparsity level") {
  // floor(2 (ln 1000 / 100)^{-1}) = floor(28.95...)
  CHECK(truncated_sparsity_level(2.0, 0.5, 1000, 100) == 28);
  CHECK(truncated_sparsity_level(1.0, 1.5, 1000, 100) ==
        static_cast<Index>(std::floor(std::pow(std::log(1000.0) / 100.0, -0.5))));
  CHECK(truncated_sparsity_level(1.0, 1.0, 500, 1000) > truncated_sparsity_level(1.0, 1.0, 500, 100));
}
