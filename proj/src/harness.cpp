#include "debiased/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "debiased/errors.hpp"
#include "debiased/io.hpp"
#include "debiased/numeric.hpp"
#include "debiased/rng.hpp"

namespace debiased {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// stream tags for derive_seed
constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kFoldStream = 2;
constexpr std::uint64_t kCoeffStream = 0xC0EFF;

Index dgp_dimension(const McConfig& cfg, Index n) {
  if (std::holds_alternative<DiscreteAteConfig>(cfg.dgp)) return 2;
  return cfg.p_rule(n);
}

struct Resolved {
  Index p = 0;
  std::variant<Assumption1Config, Assumption2Config, LowerBoundConfig, DiscreteAteConfig> dgp;
};

Resolved resolve(const McConfig& cfg, std::size_t n_index) {
  const Index n = cfg.n_grid[n_index];
  const Index p = dgp_dimension(cfg, n);
  auto coeff_seed = [&](std::uint64_t which) {
    return derive_seed(cfg.master_seed, {static_cast<std::uint64_t>(n_index), kCoeffStream, which});
  };
  Resolved out;
  out.p = p;
  std::visit(overloaded{
                 [&](const Assumption1Dgp& d) {
                   Assumption1Config a;
                   a.gamma = resolve_coeffs(p, d.gamma, coeff_seed(1));
                   a.pi = resolve_coeffs(p, d.pi, coeff_seed(2));
                   a.omega = d.omega;
                   a.m_bound = d.m_bound;
                   a.validate();
                   out.dgp = std::move(a);
                 },
                 [&](const Assumption2Dgp& d) {
                   Assumption2Config a;
                   a.theta = d.theta;
                   a.mu = resolve_coeffs(p, d.mu, coeff_seed(1));
                   a.pi = resolve_coeffs(p, d.pi, coeff_seed(2));
                   a.sigma_u2 = d.sigma_u2;
                   a.sigma_eps2 = d.sigma_eps2;
                   a.m_bound = d.m_bound;
                   a.validate();
                   out.dgp = std::move(a);
                 },
                 [&](const LowerBoundDgp& d) {
                   LowerBoundConfig lb = d.resolve(n, p);
                   lb.validate();
                   out.dgp = lb;
                 },
                 [&](const DiscreteAteConfig& d) {
                   d.validate();
                   out.dgp = d;
                 },
             },
             cfg.dgp);
  return out;
}

Simulated simulate(const Resolved& resolved, Index n, std::uint64_t seed) {
  return std::visit(overloaded{
                        [&](const Assumption1Config& c) { return gen_assumption1(n, c, seed); },
                        [&](const Assumption2Config& c) { return gen_assumption2(n, c, seed); },
                        [&](const LowerBoundConfig& c) { return gen_lowerbound(n, c, seed); },
                        [&](const DiscreteAteConfig& c) { return gen_discrete_ate(n, c, seed); },
                    },
                    resolved.dgp);
}

template <typename Fn>
void parallel_for(Index count, unsigned workers, Fn&& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<Index>(count, 1))));
  if (workers == 1) {
    for (Index i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<Index> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (Index i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

double median(std::vector<double> values) {
  if (values.empty()) return std::nan("");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double mean_of(const std::vector<double>& values) {
  if (values.empty()) return std::nan("");
  return pairwise_sum(values) / static_cast<double>(values.size());
}

}  // namespace

double default_penalty(Index n, Index p, double c) {
  require(n >= 3, ErrorKind::InvalidArgs, "penalty rule needs n >= 3");
  require(p >= 2, ErrorKind::InvalidArgs, "penalty rule needs p >= 2");
  require(c > 0.0, ErrorKind::InvalidArgs, "penalty constant must be positive");
  const double dn = static_cast<double>(n);
  return c * std::sqrt(std::log(static_cast<double>(p)) / dn) * std::log(std::log(std::max(dn, 16.0)));
}

VectorXd resolve_coeffs(Index p, const CoeffSpec& spec, std::uint64_t seed) {
  VectorXd v;
  if (spec.style == CoeffSpec::Style::Zero) {
    v = VectorXd::Zero(p);
  } else {
    SparseApproxSpec s;
    s.xi = spec.xi;
    s.c = spec.c;
    s.k = spec.k;
    s.magnitude = spec.magnitude;
    switch (spec.style) {
      case CoeffSpec::Style::PowerLawDecay: s.style = SparsityStyle::PowerLawDecay; break;
      case CoeffSpec::Style::PermutedPowerLaw: s.style = SparsityStyle::PermutedPowerLaw; break;
      default: s.style = SparsityStyle::ExactKSparse; break;
    }
    v = make_coeffs(p, s, seed);
  }
  if (spec.l2_norm) {
    require(*spec.l2_norm >= 0.0, ErrorKind::InvalidConfig, "l2_norm must be nonnegative");
    const double norm = v.norm();
    if (norm > 0.0) v *= *spec.l2_norm / norm;
  }
  return v;
}

LowerBoundConfig LowerBoundDgp::resolve(Index n, Index p) const {
  LowerBoundConfig cfg;
  cfg.n = n;
  cfg.p = p;
  cfg.kappa = kappa;
  cfg.c_zero = c_zero;
  cfg.m1 = m1;
  cfg.m2 = m2;
  cfg.c0 = c0.value_or(std::sqrt(kappa / 12.0));
  cfg.c1 = c1.value_or(std::min(m1, 2.0 * c_zero) / cfg.c0);
  return cfg;
}

Index PRule::operator()(Index n) const {
  double p = 0.0;
  switch (kind) {
    case Kind::Fixed: p = value; break;
    case Kind::Linear: p = value * static_cast<double>(n); break;
    case Kind::Power: p = std::pow(static_cast<double>(n), value); break;
  }
  return static_cast<Index>(std::llround(p));
}

double PenaltyRule::operator()(Index n, Index p) const {
  if (fixed) {
    require(*fixed >= 0.0, ErrorKind::InvalidConfig, "fixed penalty must be nonnegative");
    return *fixed;
  }
  return default_penalty(n, p, c);
}

void McConfig::validate() const {
  require(replications >= 1, ErrorKind::InvalidConfig, "replications must be at least 1");
  require(!n_grid.empty(), ErrorKind::InvalidConfig, "n_grid must not be empty");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    require(n_grid[i] >= 4, ErrorKind::InvalidConfig, "every n must be at least 4");
    if (i > 0) require(n_grid[i] > n_grid[i - 1], ErrorKind::InvalidConfig, "n_grid must be ascending");
  }
  require(level > 0.0 && level < 1.0, ErrorKind::InvalidConfig, "level must lie in (0, 1)");
  require(p_rule.value > 0.0, ErrorKind::InvalidConfig, "p rule parameter must be positive");
  require(penalty.fixed.has_value() || penalty.c > 0.0, ErrorKind::InvalidConfig,
          "penalty constant must be positive");
  require(memory_budget_mb > 0.0, ErrorKind::InvalidConfig, "memory budget must be positive");
  if (estimator.kind == EstimatorChoice::Kind::CrossfitAvgProduct) {
    require(!std::holds_alternative<DiscreteAteConfig>(dgp), ErrorKind::InvalidConfig,
            "the discrete treatment design has no z column for the average product");
  }
  for (Index n : n_grid) {
    if (!std::holds_alternative<DiscreteAteConfig>(dgp)) {
      require(p_rule(n) >= 1, ErrorKind::InvalidConfig, "p rule gives p < 1 at n = " + std::to_string(n));
    }
  }
}

unsigned default_worker_count() {
  if (const char* env = std::getenv("DEBIASED_THREADS")) {
    char* end = nullptr;
    const long value = std::strtol(env, &end, 10);
    if (end != env && value > 0) return static_cast<unsigned>(value);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

ReplicationOutcome run_replication(const McConfig& cfg, std::size_t n_index, Index rep) {
  const Resolved resolved = resolve(cfg, n_index);
  const Index n = cfg.n_grid[n_index];
  ReplicationOutcome out;
  try {
    const auto path_seed = [&](std::uint64_t stream) {
      return derive_seed(cfg.master_seed,
                         {static_cast<std::uint64_t>(n_index), static_cast<std::uint64_t>(rep), stream});
    };
    Simulated sim = simulate(resolved, n, path_seed(kDataStream));
    out.theta_true = sim.theta_true;
    const Dictionary dict = parse_dictionary(cfg.dictionary, sim.data.input_dim());
    const double r = cfg.penalty(n, dict.size());
    EstimateReport report;
    if (cfg.estimator.kind == EstimatorChoice::Kind::CrossfitAvgProduct) {
      const FoldAssignment folds = split_two_fold(n, path_seed(kFoldStream));
      report = estimate_avg_product_crossfit(std::move(sim.data), dict, r, folds);
    } else {
      const FunctionalSpec functional = parse_functional(cfg.estimator.functional, sim.data.x_names);
      report = estimate_functional_nocrossfit(sim.data, dict, functional, r);
    }
    out.theta_hat = report.theta_hat;
    out.v_hat = report.v_hat;
    out.ci = report.ci(cfg.level);
    out.converged = report.converged;
    out.ok = report.converged;
    if (!report.converged) out.failure = "Lasso did not converge";
  } catch (const std::exception& e) {
    out.ok = false;
    out.failure = e.what();
  }
  return out;
}

McSummary run_mc(const McConfig& cfg) {
  cfg.validate();
  McSummary summary;
  summary.config = cfg;
  const unsigned requested = cfg.threads.value_or(default_worker_count());

  for (std::size_t ni = 0; ni < cfg.n_grid.size(); ++ni) {
    const Index n = cfg.n_grid[ni];
    const Resolved resolved = resolve(cfg, ni);  // surfaces config errors before any work
    const Index input_dim = resolved.p;
    const Index p = parse_dictionary(cfg.dictionary, input_dim).size();

    // Each concurrent replication holds an n x p design (twice for non-raw
    // dictionaries); cap the workers to the memory budget.
    const double bytes = 2.0 * 8.0 * static_cast<double>(n) * static_cast<double>(std::max(p, input_dim));
    const auto by_memory = static_cast<unsigned>(std::max(1.0, cfg.memory_budget_mb * 1048576.0 / bytes));
    const unsigned workers = std::min(requested, by_memory);

    std::vector<ReplicationOutcome> outcomes(static_cast<std::size_t>(cfg.replications));
    parallel_for(cfg.replications, workers,
                 [&](Index rep) { outcomes[static_cast<std::size_t>(rep)] = run_replication(cfg, ni, rep); });

    McRow row;
    row.n = n;
    row.p = p;
    row.r = cfg.penalty(n, p);
    row.replications = cfg.replications;
    std::vector<double> errors, sq_errors, abs_errors, covered, lengths, v_hats, truths;
    for (const auto& o : outcomes) {
      if (!o.ok) {
        ++row.censored;
        continue;
      }
      const double e = o.theta_hat - o.theta_true;
      errors.push_back(e);
      sq_errors.push_back(e * e);
      abs_errors.push_back(std::abs(e));
      covered.push_back(o.ci.contains(o.theta_true) ? 1.0 : 0.0);
      lengths.push_back(o.ci.length());
      v_hats.push_back(o.v_hat);
      truths.push_back(o.theta_true);
    }
    row.aggregated = static_cast<Index>(errors.size());
    row.bias = mean_of(errors);
    row.rmse = std::sqrt(mean_of(sq_errors));
    row.coverage = mean_of(covered);
    row.mean_ci_length = mean_of(lengths);
    row.mean_v_hat = mean_of(v_hats);
    row.mean_theta_true = mean_of(truths);
    row.median_abs_error = median(abs_errors);
    if (errors.size() >= 2) {
      std::vector<double> centered(errors.size());
      for (std::size_t i = 0; i < errors.size(); ++i) centered[i] = (errors[i] - row.bias) * (errors[i] - row.bias);
      row.error_sd = std::sqrt(pairwise_sum(centered) / static_cast<double>(errors.size() - 1));
    }
    if (cfg.keep_replications) row.outcomes = std::move(outcomes);
    summary.rows.push_back(std::move(row));
  }
  return summary;
}

std::vector<BoundaryRow> rate_boundaries(std::vector<double> grid) {
  for (double g : grid) {
    require(g > 0.0 && std::isfinite(g), ErrorKind::InvalidArgs, "boundary grid values must be positive");
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  auto exponent = [](double t) { return 2.0 * t / (2.0 * t + 1.0); };
  std::vector<BoundaryRow> rows;
  for (double x : grid) {
    const double xi2 = std::max(0.5 - x, 0.0);
    rows.push_back({"triangle", x, xi2, xi2});
  }
  for (double x : grid) {
    const double xi2 = x <= 0.5 ? 0.5 : 0.0;
    rows.push_back({"box", x, xi2, xi2});
  }
  for (double x : grid) {
    // x/(2x+1) + y/(2y+1) = 1/2 solves to y = 1/(4x)
    const double xi2 = 1.0 / (4.0 * x);
    rows.push_back({"hyperbola", x, xi2, xi2});
  }
  for (double x : grid) rows.push_back({"rate_exponent", x, std::nullopt, exponent(x)});
  for (double x : grid) {
    for (double y : grid) rows.push_back({"rate_surface", x, y, exponent(std::max(x, y))});
  }
  return rows;
}

}  // namespace debiased
