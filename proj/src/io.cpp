#include "debiased/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "debiased/errors.hpp"

namespace debiased {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<double> to_double(const std::string& s) {
  double value = 0.0;
  const char* begin = s.data();
  const char* end = begin + s.size();
  if (begin != end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    std::string lower = s;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "nan") return std::numeric_limits<double>::quiet_NaN();
    return std::nullopt;
  }
  return value;
}

std::optional<long long> to_integer(const std::string& s) {
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

Index resolve_column(const std::string& token, const std::vector<std::string>& x_names) {
  const auto it = std::find(x_names.begin(), x_names.end(), token);
  if (it != x_names.end()) return static_cast<Index>(it - x_names.begin());
  const auto idx = to_integer(token);
  require(idx.has_value() && *idx >= 0 && *idx < static_cast<long long>(x_names.size()), ErrorKind::MissingColumn,
          "no x column named or indexed '" + token + "'");
  return static_cast<Index>(*idx);
}

// Object reader that rejects unknown keys.
class Fields {
 public:
  Fields(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    require(j.is_object(), ErrorKind::InvalidConfig, where_ + " must be a JSON object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <typename T>
  T get(const std::string& key) {
    require(has(key), ErrorKind::InvalidConfig, where_ + ": missing field '" + key + "'");
    return take<T>(key);
  }

  template <typename T>
  T get_or(const std::string& key, T fallback) {
    return has(key) ? take<T>(key) : fallback;
  }

  template <typename T>
  std::optional<T> get_opt(const std::string& key) {
    if (!has(key) || j_.at(key).is_null()) {
      if (has(key)) seen_.insert(key);
      return std::nullopt;
    }
    return take<T>(key);
  }

  const Json& raw(const std::string& key) {
    require(has(key), ErrorKind::InvalidConfig, where_ + ": missing field '" + key + "'");
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      require(seen_.count(key) > 0, ErrorKind::InvalidConfig, where_ + ": unknown field '" + key + "'");
    }
  }

 private:
  template <typename T>
  T take(const std::string& key) {
    seen_.insert(key);
    try {
      return j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::InvalidConfig, where_ + ": field '" + key + "' has the wrong type");
    }
  }

  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

CoeffSpec coeff_from_json(const Json& j, const std::string& where) {
  Fields f(j, where);
  CoeffSpec spec;
  const auto style = f.get<std::string>("style");
  if (style == "zero") spec.style = CoeffSpec::Style::Zero;
  else if (style == "power_law") spec.style = CoeffSpec::Style::PowerLawDecay;
  else if (style == "permuted_power_law") spec.style = CoeffSpec::Style::PermutedPowerLaw;
  else if (style == "k_sparse") spec.style = CoeffSpec::Style::ExactKSparse;
  else throw Error(ErrorKind::InvalidConfig, where + ": unknown style '" + style + "'");
  spec.xi = f.get_or("xi", spec.xi);
  spec.c = f.get_or("c", spec.c);
  spec.k = f.get_or<Index>("k", spec.k);
  spec.magnitude = f.get_or("magnitude", spec.magnitude);
  spec.l2_norm = f.get_opt<double>("l2_norm");
  f.finish();
  return spec;
}

Json coeff_to_json(const CoeffSpec& spec) {
  static const char* names[] = {"zero", "power_law", "permuted_power_law", "k_sparse"};
  Json j;
  j["style"] = names[static_cast<int>(spec.style)];
  j["xi"] = spec.xi;
  j["c"] = spec.c;
  j["k"] = spec.k;
  j["magnitude"] = spec.magnitude;
  if (spec.l2_norm) j["l2_norm"] = *spec.l2_norm;
  return j;
}

Matrix2d omega_from_json(const Json& j) {
  require(j.is_array() && j.size() == 2 && j[0].is_array() && j[0].size() == 2 && j[1].is_array() &&
              j[1].size() == 2,
          ErrorKind::InvalidConfig, "omega must be a 2x2 nested array");
  Matrix2d m;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      require(j[a][b].is_number(), ErrorKind::InvalidConfig, "omega entries must be numbers");
      m(a, b) = j[a][b].get<double>();
    }
  return m;
}

DgpConfig dgp_from_json(const Json& j) {
  Fields f(j, "dgp");
  const auto kind = f.get<std::string>("kind");
  DgpConfig out;
  if (kind == "assumption1") {
    Assumption1Dgp d;
    d.gamma = coeff_from_json(f.raw("gamma"), "dgp.gamma");
    d.pi = coeff_from_json(f.raw("pi"), "dgp.pi");
    if (f.has("omega")) d.omega = omega_from_json(f.raw("omega"));
    d.m_bound = f.get_or("m_bound", d.m_bound);
    out = d;
  } else if (kind == "assumption2") {
    Assumption2Dgp d;
    d.theta = f.get_or("theta", d.theta);
    d.mu = coeff_from_json(f.raw("mu"), "dgp.mu");
    d.pi = coeff_from_json(f.raw("pi"), "dgp.pi");
    d.sigma_u2 = f.get_or("sigma_u2", d.sigma_u2);
    d.sigma_eps2 = f.get_or("sigma_eps2", d.sigma_eps2);
    d.m_bound = f.get_or("m_bound", d.m_bound);
    out = d;
  } else if (kind == "lowerbound") {
    LowerBoundDgp d;
    d.c0 = f.get_opt<double>("c0");
    d.c1 = f.get_opt<double>("c1");
    d.kappa = f.get_or("kappa", d.kappa);
    d.c_zero = f.get_or("c_zero", d.c_zero);
    d.m1 = f.get_or("m1", d.m1);
    d.m2 = f.get_or("m2", d.m2);
    out = d;
  } else if (kind == "discrete_ate") {
    DiscreteAteConfig d;
    d.treat_prob = f.get_or("treat_prob", d.treat_prob);
    d.levels = f.get_or<Index>("levels", d.levels);
    d.noise_sd = f.get_or("noise_sd", d.noise_sd);
    out = d;
  } else {
    throw Error(ErrorKind::InvalidConfig, "dgp: unknown kind '" + kind + "'");
  }
  f.finish();
  return out;
}

Json dgp_to_json(const DgpConfig& dgp) {
  Json j;
  if (const auto* d = std::get_if<Assumption1Dgp>(&dgp)) {
    j["kind"] = "assumption1";
    j["gamma"] = coeff_to_json(d->gamma);
    j["pi"] = coeff_to_json(d->pi);
    j["omega"] = {{d->omega(0, 0), d->omega(0, 1)}, {d->omega(1, 0), d->omega(1, 1)}};
    j["m_bound"] = d->m_bound;
  } else if (const auto* d2 = std::get_if<Assumption2Dgp>(&dgp)) {
    j["kind"] = "assumption2";
    j["theta"] = d2->theta;
    j["mu"] = coeff_to_json(d2->mu);
    j["pi"] = coeff_to_json(d2->pi);
    j["sigma_u2"] = d2->sigma_u2;
    j["sigma_eps2"] = d2->sigma_eps2;
    j["m_bound"] = d2->m_bound;
  } else if (const auto* lb = std::get_if<LowerBoundDgp>(&dgp)) {
    j["kind"] = "lowerbound";
    if (lb->c0) j["c0"] = *lb->c0;
    if (lb->c1) j["c1"] = *lb->c1;
    j["kappa"] = lb->kappa;
    j["c_zero"] = lb->c_zero;
    j["m1"] = lb->m1;
    j["m2"] = lb->m2;
  } else {
    const auto& a = std::get<DiscreteAteConfig>(dgp);
    j["kind"] = "discrete_ate";
    j["treat_prob"] = a.treat_prob;
    j["levels"] = a.levels;
    j["noise_sd"] = a.noise_sd;
  }
  return j;
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

// ---------------------------------------------------------------------------
// CSV

Dataset parse_dataset_csv(const std::string& text, const CsvColumns& columns) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split(line, ',');
      break;
    }
  }
  require(!header.empty(), ErrorKind::ParseError, "CSV has no header row");
  {
    std::set<std::string> unique(header.begin(), header.end());
    require(unique.size() == header.size(), ErrorKind::ParseError, "CSV header has duplicate column names");
  }

  std::optional<std::size_t> y_idx, z_idx;
  std::vector<std::size_t> x_idx;
  Dataset data;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == columns.y) y_idx = c;
    else if (header[c] == columns.z) z_idx = c;
    else {
      x_idx.push_back(c);
      data.x_names.push_back(header[c]);
    }
  }
  require(y_idx.has_value(), ErrorKind::MissingColumn, "CSV has no column '" + columns.y + "'");
  if (columns.treatment) {
    const auto it = std::find(data.x_names.begin(), data.x_names.end(), *columns.treatment);
    require(it != data.x_names.end(), ErrorKind::MissingColumn,
            "CSV has no x column '" + *columns.treatment + "'");
    data.treatment_column = static_cast<Index>(it - data.x_names.begin());
  }

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split(line, ',');
    require(cells.size() == header.size(), ErrorKind::ParseError,
            "line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) + " fields, got " +
                std::to_string(cells.size()));
    std::vector<double> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto v = to_double(cells[c]);
      require(v.has_value(), ErrorKind::ParseError,
              "line " + std::to_string(line_no) + ", column " + std::to_string(c + 1) + " (" + header[c] +
                  "): cannot parse '" + cells[c] + "'");
      row[c] = *v;
    }
    rows.push_back(std::move(row));
  }

  const auto n = static_cast<Index>(rows.size());
  data.y.resize(n);
  data.x.resize(n, static_cast<Index>(x_idx.size()));
  if (z_idx) data.z = VectorXd(n);
  for (Index i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    data.y(i) = row[*y_idx];
    if (z_idx) (*data.z)(i) = row[*z_idx];
    for (std::size_t c = 0; c < x_idx.size(); ++c) data.x(i, static_cast<Index>(c)) = row[x_idx[c]];
  }
  data.validate();
  return data;
}

Dataset read_dataset_csv(const std::filesystem::path& path, const CsvColumns& columns) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::ParseError, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_dataset_csv(buffer.str(), columns);
}

std::string dataset_to_csv(const Dataset& data) {
  std::ostringstream out;
  out << "y";
  if (data.z) out << ",z";
  for (const auto& name : data.x_names) out << ',' << name;
  out << '\n';
  for (Index i = 0; i < data.n(); ++i) {
    out << fmt(data.y(i));
    if (data.z) out << ',' << fmt((*data.z)(i));
    for (Index j = 0; j < data.x.cols(); ++j) out << ',' << fmt(data.x(i, j));
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// spec strings

Dictionary parse_dictionary(const std::string& spec, Index input_dim) {
  if (spec == "raw") return Dictionary::raw(input_dim);
  if (spec == "intercept") return Dictionary::intercept(input_dim);
  if (spec.rfind("poly:", 0) == 0) {
    const auto degree = to_integer(spec.substr(5));
    require(degree.has_value() && *degree >= 1 && *degree <= 16, ErrorKind::InvalidArgs,
            "polynomial degree must be an integer in [1, 16]: '" + spec + "'");
    return Dictionary::polynomial(input_dim, static_cast<int>(*degree));
  }
  throw Error(ErrorKind::InvalidArgs, "unknown dictionary '" + spec + "' (raw, intercept, poly:<d>)");
}

FunctionalSpec parse_functional(const std::string& spec, const std::vector<std::string>& x_names,
                                std::optional<Index> default_treatment) {
  if (spec == "avg_product") return AverageProduct{};
  if (spec == "ate") {
    require(default_treatment.has_value(), ErrorKind::InvalidArgs, "ate needs a treatment column (ate:<col>)");
    return AverageTreatmentEffect{*default_treatment};
  }
  if (spec.rfind("ate:", 0) == 0) return AverageTreatmentEffect{resolve_column(spec.substr(4), x_names)};
  if (spec.rfind("wad:", 0) == 0) {
    WeightedAverageDerivative wad;
    wad.column = resolve_column(spec.substr(4), x_names);
    return wad;
  }
  throw Error(ErrorKind::InvalidArgs,
              "unknown functional '" + spec + "' (avg_product, ate, ate:<col>, wad:<col>)");
}

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<double> out;
  const auto colon = split(spec, ':');
  if (colon.size() == 3) {
    const auto a = to_double(colon[0]), step = to_double(colon[1]), b = to_double(colon[2]);
    require(a && step && b && *step > 0.0 && *b >= *a, ErrorKind::InvalidArgs,
            "grid must be start:step:end with step > 0 and end >= start");
    const auto count = static_cast<long long>(std::floor((*b - *a) / *step + 1e-9));
    require(count < 1000000, ErrorKind::InvalidArgs, "grid has too many points");
    for (long long k = 0; k <= count; ++k) out.push_back(*a + static_cast<double>(k) * *step);
    return out;
  }
  require(colon.size() == 1, ErrorKind::InvalidArgs, "cannot parse grid '" + spec + "'");
  for (const auto& token : split(spec, ',')) {
    const auto v = to_double(token);
    require(v.has_value(), ErrorKind::InvalidArgs, "cannot parse grid value '" + token + "'");
    out.push_back(*v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

Json report_to_json(const EstimateReport& report, double level, std::optional<std::uint64_t> seed) {
  const Interval ci = report.ci(level);
  Json j;
  j["theta_hat"] = report.theta_hat;
  j["v_hat"] = report.v_hat;
  j["n"] = report.n;
  j["ci_low"] = ci.low;
  j["ci_high"] = ci.high;
  j["level"] = level;
  j["r"] = report.penalty;
  j["converged"] = report.converged;
  j["seed"] = seed ? Json(*seed) : Json(nullptr);
  return j;
}

McConfig mc_config_from_json(const Json& j) {
  Fields f(j, "config");
  const auto version = f.get<int>("schema_version");
  require(version == kSchemaVersion, ErrorKind::InvalidConfig,
          "unsupported schema_version " + std::to_string(version));
  McConfig cfg;
  cfg.dgp = dgp_from_json(f.raw("dgp"));
  if (f.has("estimator")) {
    Fields e(f.raw("estimator"), "estimator");
    const auto kind = e.get<std::string>("kind");
    if (kind == "crossfit") cfg.estimator.kind = EstimatorChoice::Kind::CrossfitAvgProduct;
    else if (kind == "nocrossfit") cfg.estimator.kind = EstimatorChoice::Kind::NoCrossfit;
    else throw Error(ErrorKind::InvalidConfig, "estimator: unknown kind '" + kind + "'");
    cfg.estimator.functional = e.get_or<std::string>("functional", cfg.estimator.functional);
    e.finish();
  }
  cfg.dictionary = f.get_or<std::string>("dictionary", cfg.dictionary);
  cfg.n_grid = f.get<std::vector<Index>>("n_grid");
  if (f.has("p_rule")) {
    Fields p(f.raw("p_rule"), "p_rule");
    const auto kind = p.get<std::string>("kind");
    if (kind == "fixed") cfg.p_rule.kind = PRule::Kind::Fixed;
    else if (kind == "linear") cfg.p_rule.kind = PRule::Kind::Linear;
    else if (kind == "power") cfg.p_rule.kind = PRule::Kind::Power;
    else throw Error(ErrorKind::InvalidConfig, "p_rule: unknown kind '" + kind + "'");
    cfg.p_rule.value = p.get<double>("value");
    p.finish();
  }
  cfg.replications = f.get_or<Index>("replications", cfg.replications);
  if (f.has("penalty")) {
    Fields p(f.raw("penalty"), "penalty");
    cfg.penalty.c = p.get_or("c", cfg.penalty.c);
    cfg.penalty.fixed = p.get_opt<double>("fixed");
    p.finish();
  }
  cfg.level = f.get_or("level", cfg.level);
  cfg.master_seed = f.get_or<std::uint64_t>("master_seed", cfg.master_seed);
  cfg.threads = f.get_opt<unsigned>("threads");
  cfg.memory_budget_mb = f.get_or("memory_budget_mb", cfg.memory_budget_mb);
  cfg.keep_replications = f.get_or("keep_replications", cfg.keep_replications);
  f.finish();
  cfg.validate();
  return cfg;
}

Json mc_config_to_json(const McConfig& cfg) {
  static const char* p_kinds[] = {"fixed", "linear", "power"};
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["dgp"] = dgp_to_json(cfg.dgp);
  j["estimator"] = {
      {"kind", cfg.estimator.kind == EstimatorChoice::Kind::CrossfitAvgProduct ? "crossfit" : "nocrossfit"},
      {"functional", cfg.estimator.functional}};
  j["dictionary"] = cfg.dictionary;
  j["n_grid"] = cfg.n_grid;
  j["p_rule"] = {{"kind", p_kinds[static_cast<int>(cfg.p_rule.kind)]}, {"value", cfg.p_rule.value}};
  j["replications"] = cfg.replications;
  Json penalty;
  penalty["c"] = cfg.penalty.c;
  if (cfg.penalty.fixed) penalty["fixed"] = *cfg.penalty.fixed;
  j["penalty"] = penalty;
  j["level"] = cfg.level;
  j["master_seed"] = cfg.master_seed;
  if (cfg.threads) j["threads"] = *cfg.threads;
  j["memory_budget_mb"] = cfg.memory_budget_mb;
  j["keep_replications"] = cfg.keep_replications;
  return j;
}

McConfig read_mc_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::ParseError, "cannot open " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
  return mc_config_from_json(j);
}

Json summary_to_json(const McSummary& summary) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["config"] = mc_config_to_json(summary.config);
  Json rows = Json::array();
  for (const auto& row : summary.rows) {
    Json r;
    r["n"] = row.n;
    r["p"] = row.p;
    r["r"] = row.r;
    r["bias"] = number_or_null(row.bias);
    r["rmse"] = number_or_null(row.rmse);
    r["error_sd"] = number_or_null(row.error_sd);
    r["median_abs_error"] = number_or_null(row.median_abs_error);
    r["coverage"] = number_or_null(row.coverage);
    r["mean_ci_length"] = number_or_null(row.mean_ci_length);
    r["mean_v_hat"] = number_or_null(row.mean_v_hat);
    r["mean_theta_true"] = number_or_null(row.mean_theta_true);
    r["censored"] = row.censored;
    r["replications"] = row.replications;
    if (!row.outcomes.empty()) {
      Json reps = Json::array();
      for (const auto& o : row.outcomes) {
        Json x;
        x["ok"] = o.ok;
        if (o.ok) {
          x["theta_hat"] = o.theta_hat;
          x["theta_true"] = o.theta_true;
          x["v_hat"] = o.v_hat;
          x["ci_low"] = o.ci.low;
          x["ci_high"] = o.ci.high;
        } else {
          x["failure"] = o.failure;
        }
        reps.push_back(std::move(x));
      }
      r["outcomes"] = std::move(reps);
    }
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  return j;
}

std::string summary_to_csv(const McSummary& summary) {
  std::ostringstream out;
  out << "n,p,r,bias,rmse,coverage,mean_ci_length,censored,replications\n";
  for (const auto& row : summary.rows) {
    out << row.n << ',' << row.p << ',' << fmt(row.r) << ',' << fmt(row.bias) << ',' << fmt(row.rmse) << ','
        << fmt(row.coverage) << ',' << fmt(row.mean_ci_length) << ',' << row.censored << ',' << row.replications
        << '\n';
  }
  return out.str();
}

std::string boundaries_to_csv(const std::vector<BoundaryRow>& rows) {
  std::ostringstream out;
  out << "curve,xi1,xi2,value\n";
  for (const auto& row : rows) {
    out << row.curve << ',' << fmt(row.xi1) << ',' << (row.xi2 ? fmt(*row.xi2) : std::string()) << ','
        << fmt(row.value) << '\n';
  }
  return out.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::InvalidArgs, "cannot write " + tmp.string());
    out << contents;
    out.flush();
    require(static_cast<bool>(out), ErrorKind::InvalidArgs, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorKind::InvalidArgs, "cannot move output into place at " + path.string());
  }
}

}  // namespace debiased
