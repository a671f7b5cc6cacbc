// debiased: estimate, simulate, boundaries.
//
// Exit status: 0 success, 1 invalid input or configuration, 2 runtime failure
// (including a Lasso fit that did not converge; its report is still written).

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "debiased/errors.hpp"
#include "debiased/estimators.hpp"
#include "debiased/harness.hpp"
#include "debiased/io.hpp"

namespace {

using namespace debiased;

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;

struct EstimateArgs {
  std::string data;
  std::string functional = "avg_product";
  std::string dict = "raw";
  std::string penalty = "auto";
  bool crossfit = false;
  std::optional<std::uint64_t> seed;
  double level = 0.95;
  std::string y_col = "y";
  std::string z_col = "z";
  std::optional<std::string> treatment;
  std::string out;
};

// A number is the penalty itself; "auto" and "auto:<c>" apply the default rule.
double resolve_penalty(const std::string& spec, Index n, Index p) {
  if (spec == "auto") return default_penalty(n, p, kDefaultPenaltyConstant);
  if (spec.rfind("auto:", 0) == 0) {
    const auto c = parse_grid(spec.substr(5));
    require(c.size() == 1, ErrorKind::InvalidArgs, "cannot parse penalty '" + spec + "'");
    return default_penalty(n, p, c.front());
  }
  const auto r = parse_grid(spec);
  require(r.size() == 1 && r.front() >= 0.0, ErrorKind::InvalidArgs,
          "penalty must be a nonnegative number, auto or auto:<c>");
  return r.front();
}

int run_estimate(const EstimateArgs& args) {
  CsvColumns columns;
  columns.y = args.y_col;
  columns.z = args.z_col;
  columns.treatment = args.treatment;
  Dataset data = read_dataset_csv(args.data, columns);
  const Dictionary dict = parse_dictionary(args.dict, data.input_dim());
  const double r = resolve_penalty(args.penalty, data.n(), std::max<Index>(dict.size(), 2));

  EstimateReport report;
  if (args.crossfit) {
    require(args.functional == "avg_product", ErrorKind::InvalidArgs,
            "--crossfit supports only the avg_product functional");
    report = estimate_avg_product_crossfit(data, dict, r, args.seed.value_or(0));
  } else {
    const FunctionalSpec functional = parse_functional(args.functional, data.x_names, data.treatment_column);
    report = estimate_functional_nocrossfit(data, dict, functional, r);
  }
  const auto seed = args.crossfit ? std::optional<std::uint64_t>(args.seed.value_or(0)) : args.seed;
  write_file_atomic(args.out, report_to_json(report, args.level, seed).dump(2) + "\n");
  if (!report.converged) {
    std::cerr << "error: a Lasso fit did not converge; report written with converged = false\n";
    return kRuntime;
  }
  return kOk;
}

int run_simulate(const std::string& config, const std::string& out) {
  const McConfig cfg = read_mc_config(config);
  const McSummary summary = run_mc(cfg);
  const bool csv = std::filesystem::path(out).extension() == ".csv";
  write_file_atomic(out, csv ? summary_to_csv(summary) : summary_to_json(summary).dump(2) + "\n");
  return kOk;
}

int run_boundaries(const std::string& grid, const std::string& out) {
  write_file_atomic(out, boundaries_to_csv(rate_boundaries(parse_grid(grid))));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Debiased estimation of linear functionals with Lasso learners"};
  app.require_subcommand(1);

  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate", "Estimate a functional from a CSV dataset");
  estimate->add_option("--data", est.data, "Input CSV")->required();
  estimate->add_option("--functional", est.functional, "avg_product, ate, ate:<col>, wad:<col>")
      ->capture_default_str();
  estimate->add_option("--dict", est.dict, "raw, intercept or poly:<d>")->capture_default_str();
  estimate->add_option("--penalty", est.penalty, "Penalty r, auto or auto:<c>")->capture_default_str();
  estimate->add_flag("--crossfit", est.crossfit, "Special cross-fitting (avg_product only)");
  estimate->add_option("--seed", est.seed, "Fold split seed");
  estimate->add_option("--level", est.level, "Confidence level")->capture_default_str();
  estimate->add_option("--y", est.y_col, "Outcome column")->capture_default_str();
  estimate->add_option("--z", est.z_col, "Auxiliary column")->capture_default_str();
  estimate->add_option("--treatment", est.treatment, "Binary treatment column");
  estimate->add_option("--out", est.out, "Output JSON")->required();

  std::string config, sim_out;
  auto* simulate = app.add_subcommand("simulate", "Run a Monte Carlo study");
  simulate->add_option("--config", config, "JSON config")->required();
  simulate->add_option("--out", sim_out, "Output .json or .csv")->required();

  std::string grid, bound_out;
  auto* boundaries = app.add_subcommand("boundaries", "Emit rate boundary curves");
  boundaries->add_option("--grid", grid, "start:step:end or a,b,c")->required();
  boundaries->add_option("--out", bound_out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  }

  try {
    if (*estimate) return run_estimate(est);
    if (*simulate) return run_simulate(config, sim_out);
    return run_boundaries(grid, bound_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
}
