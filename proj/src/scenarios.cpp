#include "sqlab/scenarios.hpp"

#include "sqlab/counterexamples.hpp"
#include "sqlab/errors.hpp"
#include "sqlab/quadrature.hpp"
#include "sqlab/stats.hpp"
#include "sqlab/wick.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <regex>
#include <set>
#include <sstream>

namespace sqlab {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Config parsing

ScenarioConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  ScenarioConfig config;
  for (const auto& [key, node] : tree) {
    if (!node.empty()) {
      if (key != "params") throw ConfigError("unknown section [" + key + "]");
      for (const auto& [name, value] : node) {
        if (!value.empty()) throw ConfigError("nested keys are not supported: " + name);
        config.params.emplace_back(name, value.data());
      }
    } else if (key == "scenario") {
      config.scenario = node.data();
    } else if (key == "seed") {
      const std::string& text = node.data();
      std::uint64_t seed = 0;
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
      if (ec != std::errc() || ptr != text.data() + text.size())
        throw ConfigError("seed must be a nonnegative integer, got '" + text + "'");
      config.seed = seed;
    } else if (key == "params") {
      // empty [params] section
    } else {
      throw ConfigError("unknown top-level key '" + key + "'");
    }
  }
  if (config.scenario.empty()) throw ConfigError("missing 'scenario'");
  return config;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  return parse_config(in);
}

bool ScenarioResult::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

namespace {

// Typed access to [params]; every key must be consumed.
class Params {
 public:
  explicit Params(const std::vector<std::pair<std::string, std::string>>& raw) {
    for (const auto& [k, v] : raw)
      if (!raw_.emplace(k, v).second) throw ConfigError("duplicate parameter '" + k + "'");
  }

  double number(const std::string& key, double fallback) {
    const auto text = take(key);
    const double v = text ? parse_number(key, *text) : fallback;
    resolved_[key] = v;
    return v;
  }

  double positive(const std::string& key, double fallback) {
    const double v = number(key, fallback);
    if (!(v > 0)) throw ConfigError("parameter '" + key + "' must be positive");
    return v;
  }

  int integer(const std::string& key, int fallback) {
    const auto text = take(key);
    int v = fallback;
    if (text) {
      const double d = parse_number(key, *text);
      if (d != std::floor(d) || std::abs(d) > 1e9) throw ConfigError("parameter '" + key + "' must be an integer");
      v = static_cast<int>(d);
    }
    resolved_[key] = v;
    return v;
  }

  std::size_t count(const std::string& key, std::size_t fallback) {
    const auto text = take(key);
    std::size_t v = fallback;
    if (text) {
      const double d = parse_number(key, *text);
      if (d < 0 || d != std::floor(d) || d > 1e12) throw ConfigError("parameter '" + key + "' must be a count");
      v = static_cast<std::size_t>(d);
    }
    resolved_[key] = v;
    return v;
  }

  std::string text(const std::string& key, const std::string& fallback) {
    const auto t = take(key);
    const std::string v = t ? *t : fallback;
    resolved_[key] = v;
    return v;
  }

  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) {
    const auto t = take(key);
    std::vector<double> v = fallback;
    if (t) {
      v.clear();
      std::string s = *t;
      std::replace(s.begin(), s.end(), ',', ' ');
      std::istringstream in(s);
      std::string token;
      while (in >> token) v.push_back(parse_number(key, token));
    }
    resolved_[key] = v;
    return v;
  }

  std::vector<std::string> words(const std::string& key, const std::vector<std::string>& fallback) {
    const auto t = take(key);
    std::vector<std::string> v = fallback;
    if (t) {
      v.clear();
      std::string s = *t;
      std::replace(s.begin(), s.end(), ',', ' ');
      std::istringstream in(s);
      std::string token;
      while (in >> token) v.push_back(token);
    }
    resolved_[key] = v;
    return v;
  }

  void finish() const {
    std::string unknown;
    for (const auto& [k, v] : raw_)
      if (!used_.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
    if (!unknown.empty()) throw ConfigError("unknown parameter(s): " + unknown);
  }

  const json& resolved() const { return resolved_; }

 private:
  std::optional<std::string> take(const std::string& key) {
    used_.insert(key);
    auto it = raw_.find(key);
    if (it == raw_.end()) return std::nullopt;
    return it->second;
  }

  static double parse_number(const std::string& key, const std::string& text) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v))
      throw ConfigError("parameter '" + key + "': '" + text + "' is not a number");
    return v;
  }

  std::map<std::string, std::string> raw_;
  std::set<std::string> used_;
  json resolved_ = json::object();
};

struct Outcome {
  json results = json::object();
  std::vector<CheckResult> checks;
  std::optional<Trajectory> trajectory;
  int csv_modes = 0;

  void check(std::string name, bool passed, std::string detail) {
    checks.push_back({std::move(name), passed, std::move(detail)});
  }
};

std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(6) << v;
  return out.str();
}

json complex_json(std::complex<double> c) { return json::array({c.real(), c.imag()}); }

BasisPtr read_basis(Params& p, const std::string& domain, double length, const std::string& boundary,
                    double mass, int truncation) {
  const std::string dom = p.text("domain", domain);
  const double len = p.positive("length", length);
  const std::string bc_name = p.text("boundary", boundary);
  const double m = p.number("mass", mass);
  const int trunc = p.integer("truncation", truncation);
  const int order = p.integer("quadrature_order", 0);
  if (dom != "interval" && dom != "rectangle") throw ConfigError("domain must be 'interval' or 'rectangle'");
  try {
    const auto d = dom == "interval" ? DomainSpec::interval(len) : DomainSpec::rectangle(len, len);
    return build_basis(d, boundary_condition_from_string(bc_name), m, trunc, order);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("basis: ") + e.what());
  }
}

std::optional<WickPolynomial> read_polynomial(Params& p, const std::vector<double>& fallback) {
  const auto coeffs = p.numbers("polynomial", fallback);
  if (std::all_of(coeffs.begin(), coeffs.end(), [](double a) { return a == 0; })) return std::nullopt;
  WickPolynomial poly{coeffs};
  while (!poly.coefficients.empty() && poly.coefficients.back() == 0) poly.coefficients.pop_back();
  if (!poly.is_admissible_potential())
    throw ConfigError("polynomial needs even degree >= 2 and positive leading coefficient");
  return poly;
}

// Observable tokens: mode_squares, mode<n>, mode<n>^<p>, wick<n>.
std::vector<Observable> read_observables(Params& p, const std::vector<std::string>& fallback,
                                         const BasisPtr& basis, bool free_case) {
  const auto tokens = p.words("observables", fallback);
  const WickContext free_ctx(basis, basis->eigenvalues().cwiseInverse());
  const Eigen::VectorXd& lambda = basis->eigenvalues();
  std::vector<Observable> out;
  auto mode_obs = [&](int n, int power) {
    if (n < 0 || n >= basis->size()) throw ConfigError("observable mode " + std::to_string(n) + " outside basis");
    Observable obs = mode_power_observable(n, power);
    if (free_case) {
      if (power % 2 == 1) obs.exact_mean = 0.0;
      else if (power == 2) obs.exact_mean = 1.0 / lambda[n];
      else if (power == 4) obs.exact_mean = 3.0 / (lambda[n] * lambda[n]);
    }
    out.push_back(std::move(obs));
  };
  static const std::regex mode_re(R"(mode(\d+)(\^(\d+))?)");
  static const std::regex wick_re(R"(wick(\d+))");
  for (const auto& t : tokens) {
    std::smatch m;
    if (t == "mode_squares") {
      for (int n = 0; n < basis->size(); ++n) mode_obs(n, 2);
    } else if (std::regex_match(t, m, mode_re)) {
      mode_obs(std::stoi(m[1]), m[3].matched ? std::stoi(m[3]) : 1);
    } else if (std::regex_match(t, m, wick_re)) {
      Observable obs = wick_observable(free_ctx, std::stoi(m[1]));
      if (free_case && std::stoi(m[1]) >= 1) obs.exact_mean = 0.0;
      out.push_back(std::move(obs));
    } else {
      throw ConfigError("unknown observable '" + t + "'");
    }
  }
  if (out.empty()) throw ConfigError("no observables given");
  return out;
}

SQConfig read_sq_config(Params& p, const BasisPtr& basis, double step, double horizon,
                        double record_interval, const std::vector<double>& polynomial) {
  SQConfig c;
  c.basis = basis;
  c.polynomial = read_polynomial(p, polynomial);
  c.step = p.positive("step", step);
  c.horizon = p.positive("horizon", horizon);
  c.record_interval = p.number("record_interval", record_interval);
  c.stability_factor = p.positive("stability_factor", 0.5);
  return c;
}

void validate_sq(const SQConfig& c) {
  try {
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

// ---------------------------------------------------------------------------
// basis-check

// Lowest eigenvalue of the second-order finite-difference Laplacian on (0, 1)
// with `points` unknowns. Mixed: Dirichlet at 0, Neumann at 1 via a ghost
// node reflected about x = 1.
double fd_lowest_eigenvalue(BoundaryCondition bc, int points) {
  const bool mixed = bc == BoundaryCondition::DirichletAtZeroNeumannAtOne;
  const double h = mixed ? 1.0 / (points + 0.5) : 1.0 / (points + 1);
  Eigen::VectorXd diag = Eigen::VectorXd::Constant(points, 2.0 / (h * h));
  Eigen::VectorXd sub = Eigen::VectorXd::Constant(points - 1, -1.0 / (h * h));
  if (mixed) diag[points - 1] = 1.0 / (h * h);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

double gram_defect(const SpectralBasis& b) {
  const Eigen::MatrixXd& e = b.grid_values();
  const Eigen::MatrixXd gram = e.transpose() * b.grid_weights().asDiagonal() * e;
  return (gram - Eigen::MatrixXd::Identity(b.size(), b.size())).cwiseAbs().maxCoeff();
}

Outcome basis_check(Params& p, Rng&) {
  const int truncation = p.integer("truncation", 8);
  const int fd_points = p.integer("fd_points", 10000);
  const double eig_tol = p.positive("eigenvalue_tolerance", 1e-4);
  const double gram_tol = p.positive("gram_tolerance", 1e-10);
  if (truncation < 1 || fd_points < 10) throw ConfigError("truncation and fd_points must be positive");
  p.finish();

  Outcome out;
  const auto unit = DomainSpec::interval(1.0);
  const double pi2 = std::numbers::pi * std::numbers::pi;
  json lowest = json::array();
  auto compare = [&](BoundaryCondition bc, double exact) {
    const auto b = build_basis(unit, bc, 0.0, truncation);
    const double fd = fd_lowest_eigenvalue(bc, fd_points);
    const double rel = std::abs(b->eigenvalue(0) - fd) / fd;
    lowest.push_back({{"boundary", to_string(bc)},
                      {"spectral", b->eigenvalue(0)},
                      {"finite_difference", fd},
                      {"closed_form", exact},
                      {"relative_error", rel}});
    out.check(to_string(bc) + "_lowest_eigenvalue", rel < eig_tol,
              "spectral " + fmt(b->eigenvalue(0)) + " vs finite difference " + fmt(fd) + ", rel " + fmt(rel));
  };
  compare(BoundaryCondition::DirichletAll, pi2);
  compare(BoundaryCondition::DirichletAtZeroNeumannAtOne, pi2 / 4);
  out.results["lowest_eigenvalues"] = lowest;

  json grams = json::array();
  double worst = 0;
  auto gram = [&](const DomainSpec& d, BoundaryCondition bc, double mass) {
    const auto b = build_basis(d, bc, mass, truncation);
    const double defect = gram_defect(*b);
    worst = std::max(worst, defect);
    grams.push_back({{"dimension", d.dimension}, {"boundary", to_string(bc)}, {"max_defect", defect}});
  };
  gram(unit, BoundaryCondition::DirichletAll, 0.0);
  gram(unit, BoundaryCondition::DirichletAtZeroNeumannAtOne, 0.0);
  gram(unit, BoundaryCondition::NeumannAll, 1.0);
  gram(DomainSpec::rectangle(2, 2), BoundaryCondition::NeumannAll, 1.0);
  gram(DomainSpec::rectangle(1, 2), BoundaryCondition::DirichletAll, 0.0);
  out.results["gram"] = grams;
  out.check("gram_identity", worst < gram_tol, "max |E^T W E - I| = " + fmt(worst));
  return out;
}

// ---------------------------------------------------------------------------
// wick-suite

Outcome wick_suite(Params& p, Rng& rng) {
  const int max_degree = p.integer("max_degree", 8);
  const int nodes = p.integer("quadrature_nodes", 20);
  const int translation_degree = p.integer("translation_degree", 4);
  const int trials = p.integer("trials", 5);
  const double tol = p.positive("tolerance", 1e-10);
  const BasisPtr basis = read_basis(p, "rectangle", 2.0, "neumann", 1.0, 8);
  if (max_degree < 0 || 2 * nodes <= 2 * max_degree) throw ConfigError("quadrature_nodes must exceed max_degree");
  if (trials < 1 || translation_degree < 0) throw ConfigError("trials and translation_degree must be positive");
  p.finish();

  Outcome out;
  const auto [x, w] = gauss_hermite<long double>(nodes);
  double worst = 0;
  json table = json::array();
  for (int n = 0; n <= max_degree; ++n) {
    long double factorial = 1;
    for (int k = 2; k <= n; ++k) factorial *= k;
    for (int m = 0; m <= max_degree; ++m) {
      long double s = 0;
      for (int i = 0; i < nodes; ++i) s += w[i] * hermite<long double>(n, x[i]) * hermite<long double>(m, x[i]);
      const double err = static_cast<double>(std::abs(s - (n == m ? factorial : 0.0L)));
      worst = std::max(worst, err);
      if (n == m) table.push_back({{"n", n}, {"norm", static_cast<double>(s)}, {"error", err}});
    }
  }
  out.results["hermite_norms"] = table;
  out.results["orthogonality_max_error"] = worst;
  out.check("hermite_orthogonality", worst < tol, "max |E[He_n He_m] - n! delta| = " + fmt(worst));

  const WickContext ctx(basis, basis->eigenvalues().cwiseInverse());
  const GaussianMeasure free = GaussianMeasure::free_field(basis);
  const Eigen::VectorXd window = unit_window(*basis);
  double worst_translation = 0;
  json rows = json::array();
  for (int t = 0; t < trials; ++t) {
    const Eigen::VectorXd z = sample(free, rng);
    const Eigen::VectorXd k = 0.5 * sample(free, rng);
    for (int n = 0; n <= translation_degree; ++n) {
      const TranslationCheck c = wick_translate_check(ctx, z, k, n, window);
      worst_translation = std::max(worst_translation, c.abs_error);
      rows.push_back({{"trial", t}, {"n", n}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"abs_error", c.abs_error}});
    }
  }
  out.results["translation"] = rows;
  out.results["translation_max_error"] = worst_translation;
  out.check("wick_translation", worst_translation < tol,
            "max |:(z+k)^n: - sum C(n,m) :z^m:(k^{n-m})| = " + fmt(worst_translation));
  return out;
}

// ---------------------------------------------------------------------------
// SQ scenarios

json record_json(const StationarityRecord& r) {
  return {{"observable", r.observable},     {"time_avg", r.time_avg},
          {"time_stderr", r.time_stderr},   {"tau_int", r.tau_int},
          {"ensemble_avg", r.ensemble_avg}, {"ensemble_stderr", r.ensemble_stderr},
          {"z_score", r.z_score}};
}

Outcome sq_simulate(Params& p, Rng& rng) {
  const BasisPtr basis = read_basis(p, "rectangle", 2.0, "neumann", 1.0, 8);
  SQConfig c = read_sq_config(p, basis, 2e-3, 200.0, 0.1, {});
  const std::string start = p.text("start", "stationary");
  const double burn_in = p.number("burn_in", 0.0);
  const int csv_modes = p.integer("csv_modes", 8);
  const double z_max = p.positive("z_max", 4.0);
  c.observables = read_observables(p, {"mode0^2", "wick2"}, basis, !c.polynomial);
  validate_sq(c);
  if (start != "zero" && start != "stationary") throw ConfigError("start must be 'zero' or 'stationary'");
  if (burn_in < 0 || burn_in >= c.horizon) throw ConfigError("burn_in must lie in [0, horizon)");
  p.finish();

  const SQIntegrator integrator(c);
  Eigen::VectorXd x0 = start == "zero" ? Eigen::VectorXd::Zero(basis->size()) : stationary_sample(c, rng);
  Outcome out;
  out.trajectory = integrator.run(std::move(x0), c.horizon, rng, true);
  out.csv_modes = std::min(csv_modes, basis->size());
  const Trajectory& traj = *out.trajectory;

  std::size_t first = 0;
  while (first < traj.times.size() && traj.times[first] < burn_in - 1e-12) ++first;
  double max_abs = 0;
  for (const auto& s : traj.states) max_abs = std::max(max_abs, s.cwiseAbs().maxCoeff());
  out.results["records"] = traj.times.size();
  out.results["max_abs_coefficient"] = max_abs;
  out.check("bounded_state", std::isfinite(max_abs), "max |x_n| = " + fmt(max_abs));

  if (!c.polynomial) {
    json modes = json::array();
    double worst = 0;
    int worst_mode = 0;
    for (int n = 0; n < basis->size(); ++n) {
      std::vector<double> sq;
      for (std::size_t i = first; i < traj.states.size(); ++i) sq.push_back(traj.states[i][n] * traj.states[i][n]);
      const TimeAverage ta = time_average(sq);
      const double exact = 1.0 / basis->eigenvalue(n);
      const double z = ta.std_error > 0 ? std::abs(ta.mean - exact) / ta.std_error : INFINITY;
      if (z > worst) worst = z, worst_mode = n;
      modes.push_back({{"mode", n}, {"variance", ta.mean}, {"stderr", ta.std_error}, {"exact", exact}, {"z_score", z}});
    }
    out.results["free_variance"] = modes;
    out.check("free_variance", worst < z_max,
              "worst mode " + std::to_string(worst_mode) + " z = " + fmt(worst) + " (limit " + fmt(z_max) + ")");
  }
  return out;
}

Outcome stationarity(Params& p, Rng& rng) {
  const BasisPtr basis = read_basis(p, "rectangle", 2.0, "neumann", 1.0, 8);
  SQConfig c = read_sq_config(p, basis, 2e-3, 20000.0, 0.25, {});
  const double burn_in = p.number("burn_in", 20.0);
  const std::size_t ensemble = p.count("ensemble_samples", 100000);
  const double z_max = p.positive("z_max", 3.0);
  const double rel_tol = p.positive("lowest_mode_tolerance", 0.05);
  c.observables = read_observables(p, c.polynomial ? std::vector<std::string>{"mode0^2", "wick2"}
                                                   : std::vector<std::string>{"mode_squares"},
                                   basis, !c.polynomial);
  validate_sq(c);
  if (burn_in < 0 || burn_in >= c.horizon) throw ConfigError("burn_in must lie in [0, horizon)");
  p.finish();

  Outcome out;
  const auto records = stationarity_report(c, burn_in, ensemble, rng);
  json rows = json::array();
  double worst = 0;
  std::string worst_name;
  for (const auto& r : records) {
    rows.push_back(record_json(r));
    if (!(r.z_score <= worst)) worst = r.z_score, worst_name = r.observable;
  }
  out.results["records"] = rows;
  out.check("time_vs_ensemble", worst < z_max,
            "worst " + worst_name + " z = " + fmt(worst) + " (limit " + fmt(z_max) + ")");
  if (!c.polynomial) {
    for (const auto& r : records) {
      if (r.observable != "mode0^2") continue;
      const double rel = std::abs(r.time_avg - r.ensemble_avg) / r.ensemble_avg;
      out.results["lowest_mode_relative_error"] = rel;
      out.check("lowest_mode_relative", rel < rel_tol,
                "mode 0 variance " + fmt(r.time_avg) + " vs " + fmt(r.ensemble_avg) + ", rel " + fmt(rel));
    }
  }
  return out;
}

Outcome ergodicity(Params& p, Rng& rng) {
  const BasisPtr basis = read_basis(p, "rectangle", 2.0, "neumann", 1.0, 4);
  SQConfig c = read_sq_config(p, basis, 1e-2, 1.0, 0.1, {});
  ErgodicityOptions o;
  o.replicas = p.count("replicas", 20);
  o.replica_horizon = p.positive("replica_horizon", 5000.0);
  const double lag_factor = p.positive("lag_factor", 3.0);
  o.outer = p.count("outer", 40);
  o.inner = p.count("inner", 40);
  o.l2_times = p.numbers("l2_times", {0.0, 0.5, 1.0, 2.0, 4.0});
  const double rel_tol = p.positive("tolerance", 0.1);
  const double slack = p.positive("monotone_slack", 0.05);
  const auto observables = read_observables(p, {"mode0"}, basis, !c.polynomial);
  validate_sq(c);
  if (observables.size() != 1) throw ConfigError("ergodicity takes a single observable");
  if (o.replicas < 1 || o.outer < 2 || o.inner < 2) throw ConfigError("need replicas >= 1, outer and inner >= 2");
  if (c.record_interval <= 0) throw ConfigError("record_interval must be positive");
  auto multiple_of = [](double value, double unit) {
    const double r = value / unit;
    return std::abs(r - std::round(r)) < 1e-9 * std::max(1.0, r);
  };
  if (!multiple_of(c.record_interval, c.step) || !multiple_of(o.replica_horizon, c.record_interval))
    throw ConfigError("record_interval must be a multiple of step and replica_horizon of record_interval");
  for (double t : o.l2_times)
    if (t < 0 || !multiple_of(t, c.record_interval))
      throw ConfigError("l2_times must be nonnegative multiples of record_interval");
  const Observable& f = observables.front();
  static const std::regex linear_mode(R"(mode(\d+))");
  std::smatch m;
  const bool closed_form = !c.polynomial && std::regex_match(f.name, m, linear_mode);
  // Lags up to lag_factor / lambda of the observed mode (lowest mode otherwise).
  const double lambda = basis->eigenvalue(closed_form ? std::stoi(m[1]) : 0);
  const double rate = c.drift_factor * lambda;
  o.max_lag = std::floor(lag_factor / lambda / c.record_interval + 1e-9) * c.record_interval;
  p.finish();

  Outcome out;
  const ErgodicityReport rep = ergodicity_report(c, f, o, rng);
  json acf = json::array();
  double worst = 0;
  for (std::size_t i = 0; i < rep.lags.size(); ++i) {
    json row = {{"lag", rep.lags[i]}, {"autocorrelation", rep.autocorrelation[i]}};
    if (closed_form) {
      const double exact = std::exp(-rate * rep.lags[i]);
      const double rel = std::abs(rep.autocorrelation[i] - exact) / exact;
      worst = std::max(worst, rel);
      row["closed_form"] = exact;
      row["relative_error"] = rel;
    }
    acf.push_back(row);
  }
  out.results["observable"] = f.name;
  out.results["autocorrelation"] = acf;
  json l2 = json::array();
  for (std::size_t i = 0; i < rep.l2_times.size(); ++i) l2.push_back({{"t", rep.l2_times[i]}, {"l2_distance", rep.l2_distance[i]}});
  out.results["l2_decay"] = l2;

  if (closed_form) {
    out.check("autocorrelation_closed_form", worst < rel_tol,
              "max relative deviation from exp(-" + fmt(rate) + " t) for t <= " + fmt(o.max_lag) + ": " + fmt(worst));
  } else {
    bool monotone = true;
    for (std::size_t i = 1; i < rep.autocorrelation.size(); ++i)
      monotone = monotone && rep.autocorrelation[i] <= rep.autocorrelation[i - 1] + slack;
    out.check("autocorrelation_monotone", monotone && rep.autocorrelation.back() < rep.autocorrelation.front(),
              "rho(" + fmt(rep.lags.back()) + ") = " + fmt(rep.autocorrelation.back()));
  }
  if (rep.l2_distance.size() >= 2) {
    out.check("l2_decay", rep.l2_distance.back() < rep.l2_distance.front(),
              "||T_t f - Ef|| from " + fmt(rep.l2_distance.front()) + " to " + fmt(rep.l2_distance.back()));
  }

  Observable constant{"const", [](const Eigen::VectorXd&) { return 1.0; }, 1.0};
  ErgodicityOptions oc = o;
  oc.replicas = 1;
  oc.replica_horizon = std::max(o.max_lag, c.record_interval) * 2;
  const ErgodicityReport crep = ergodicity_report(c, constant, oc, rng);
  const double cmax = crep.l2_distance.empty() ? 0.0 : *std::max_element(crep.l2_distance.begin(), crep.l2_distance.end());
  out.results["constant_l2_max"] = cmax;
  out.check("constant_l2_zero", cmax == 0.0, "max L2 distance for f = 1: " + fmt(cmax));
  return out;
}

// ---------------------------------------------------------------------------
// invariance-suite

Outcome invariance_suite(Params& p, Rng& rng) {
  const BasisPtr basis = read_basis(p, "rectangle", 2.0, "neumann", 1.0, 4);
  const auto poly = read_polynomial(p, {0, 0, 0, 0, 0.1});
  const std::size_t samples = p.count("samples", 1000000);
  const double se_max = p.positive("stderr_max", 1e-3);
  const double z_max = p.positive("z_max", 3.0);
  if (basis->size() < 6) throw ConfigError("invariance-suite needs at least 6 modes");
  if (!poly) throw ConfigError("invariance-suite needs a nonzero polynomial for the Gibbs measure");
  p.finish();

  // Directions 0.5 lambda_n^{-1/2} e_n keep <C^{-1} k, z> of unit order.
  auto dir = [&](std::initializer_list<int> modes) {
    Eigen::VectorXd k = Eigen::VectorXd::Zero(basis->size());
    for (int n : modes) k[n] = 0.5 / std::sqrt(basis->eigenvalue(n));
    return Eigen::VectorXd(k / std::sqrt(static_cast<double>(modes.size())));
  };
  auto cyl = [&](const std::string& f, std::vector<Eigen::VectorXd> ks) {
    Eigen::MatrixXd m(basis->size(), static_cast<Eigen::Index>(ks.size()));
    for (std::size_t j = 0; j < ks.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = ks[j];
    return CylinderFunction(m, OuterFunction::parse(f));
  };
  struct Pair {
    std::string label;
    CylinderFunction u;
    Eigen::VectorXd k;
  };
  const std::vector<Pair> pairs{
      {"sin<k0>, k0", cyl("(sin x0)", {dir({0})}), dir({0})},
      {"cos<k1+k2>, k1", cyl("(cos x0)", {dir({1, 2})}), dir({1})},
      {"gauss<k3>, k3", cyl("(exp (* -0.5 (pow x0 2)))", {dir({3})}), dir({3})},
      {"sin<k0>cos<k5>, k5", cyl("(* (sin x0) (cos x1))", {dir({0}), dir({5})}), dir({5})},
      {"sin(<k2>+<k4>), k2+k4", cyl("(sin (+ x0 x1))", {dir({2}), dir({4})}), dir({2, 4})},
  };

  const GaussianMeasure free = GaussianMeasure::free_field(basis);
  const GibbsMeasure gibbs(free, poly);
  Outcome out;
  json rows = json::array();
  auto run = [&](const std::string& measure, auto&& m) {
    double worst_z = 0, worst_se = 0;
    for (const auto& pr : pairs) {
      const Estimate e = ibp_residual(m, pr.u, pr.k, samples, rng);
      const double z = e.std_error > 0 ? std::abs(e.value) / e.std_error : 0.0;
      worst_z = std::max(worst_z, z);
      worst_se = std::max(worst_se, e.std_error);
      rows.push_back({{"measure", measure},
                      {"pair", pr.label},
                      {"residual", e.value},
                      {"stderr", e.std_error},
                      {"z_score", z},
                      {"effective_sample_size", e.effective_sample_size}});
    }
    out.check(measure + "_integration_by_parts", worst_z < z_max && worst_se < se_max,
              "max z = " + fmt(worst_z) + ", max stderr = " + fmt(worst_se));
  };
  run("free", free);
  run("gibbs", gibbs);
  out.results["residuals"] = rows;
  return out;
}

// ---------------------------------------------------------------------------
// counterexamples

ExampleOptions read_example(Params& p, double time) {
  ExampleOptions o;
  o.truncation = p.integer("truncation", 32);
  o.time = p.number("time", time);
  o.y_mode = p.integer("y_mode", 0);
  o.y_scale = p.number("y_scale", 1.0);
  o.mc_samples = p.count("mc_samples", 100000);
  o.residual_samples = p.count("residual_samples", 1000000);
  if (o.truncation < 2 || o.time < 0 || o.mc_samples < 2 || o.residual_samples < 2)
    throw ConfigError("need truncation >= 2, time >= 0 and at least two samples");
  if (o.y_mode < 0 || o.y_mode >= o.truncation) throw ConfigError("y_mode outside the basis");
  return o;
}

json example_json(const ExampleReport& r) {
  json residuals = json::array();
  for (const auto& x : r.residuals)
    residuals.push_back({{"measure", x.measure},
                         {"function", x.function},
                         {"value", x.value},
                         {"stderr", x.std_error},
                         {"z_score", x.z_score()},
                         {"control", x.control}});
  return {{"example", r.example},
          {"M", r.options.truncation},
          {"t", r.options.time},
          {"y", {{"mode", r.options.y_mode}, {"scale", r.options.y_scale}}},
          {"analytic_lhs", complex_json(r.analytic_lhs)},
          {"analytic_rhs", complex_json(r.analytic_rhs)},
          {"gap", r.gap},
          {"mc_estimate", complex_json(r.mc_estimate)},
          {"mc_stderr", r.mc_stderr},
          {"mc_gap", r.mc_gap},
          {"mc_gap_stderr", r.mc_gap_stderr},
          {"residuals", residuals}};
}

void check_residuals(Outcome& out, const ExampleReport& r, const std::string& measure, double se_max,
                     double z_max) {
  double worst_z = 0, worst_se = 0;
  for (const auto& x : r.residuals) {
    if (x.measure != measure || x.control) continue;
    worst_z = std::max(worst_z, x.z_score());
    worst_se = std::max(worst_se, x.std_error);
  }
  out.check("residuals_" + measure, worst_z < z_max && worst_se < se_max,
            "max z = " + fmt(worst_z) + ", max stderr = " + fmt(worst_se));
}

bool within(std::complex<double> a, std::complex<double> b, double tol) {
  return std::abs(a.real() - b.real()) <= tol && std::abs(a.imag() - b.imag()) <= tol;
}

Outcome counterexample_1(Params& p, Rng& rng) {
  const ExampleOptions o = read_example(p, 0.1);
  const double se_max = p.positive("stderr_max", 1e-3);
  const double z_max = p.positive("z_max", 3.0);
  const double gap_factor = p.positive("gap_factor", 10.0);
  const int conv_m = p.integer("convergence_truncation", 64);
  const double conv_tol = p.positive("convergence_tolerance", 1e-6);
  if (conv_m < 1) throw ConfigError("convergence_truncation must be positive");
  p.finish();

  Outcome out;
  const ExampleReport r = run_first_example(o, rng);
  out.results = example_json(r);
  out.results["control"] = {{"measure", "mu1"},
                            {"analytic_lhs", complex_json(r.control_lhs)},
                            {"analytic_rhs", complex_json(r.control_rhs)},
                            {"gap", r.control_gap},
                            {"mc_estimate", complex_json(r.control_mc_estimate)},
                            {"mc_stderr", r.control_mc_stderr}};
  check_residuals(out, r, "mu1", se_max, z_max);
  check_residuals(out, r, "mu2", se_max, z_max);
  if (o.time > 0) {
    out.check("gap_positive", r.gap > 0 && r.gap > gap_factor * r.mc_stderr,
              "gap " + fmt(r.gap) + " vs " + fmt(gap_factor) + " x stderr " + fmt(r.mc_stderr));
  } else {
    out.check("gap_zero_at_t0", r.gap == 0.0, "gap " + fmt(r.gap));
  }
  out.check("gap_closed_form", within(r.mc_estimate, r.analytic_rhs, z_max * r.mc_stderr),
            "Monte Carlo " + fmt(r.mc_estimate.real()) + " vs closed form " + fmt(r.analytic_rhs.real()) +
                " (stderr " + fmt(r.mc_stderr) + ")");
  out.check("control_mu1",
            r.control_gap < 1e-12 && within(r.control_mc_estimate, r.control_lhs, z_max * r.control_mc_stderr),
            "closed-form gap " + fmt(r.control_gap) + ", Monte Carlo " + fmt(r.control_mc_estimate.real()) +
                " vs " + fmt(r.control_lhs.real()));

  ExampleOptions zero = o;
  zero.time = 0;
  zero.residuals = false;
  zero.mc_samples = 2;
  const ExampleReport r0 = run_first_example(zero, rng);
  out.results["gap_at_t0"] = r0.gap;
  out.check("identity_at_t0", r0.gap == 0.0, "gap at t = 0: " + fmt(r0.gap));

  Eigen::VectorXd y = Eigen::VectorXd::Zero(conv_m);
  y[std::min(o.y_mode, conv_m - 1)] = o.y_scale;
  const double coarse = FirstExampleBundle::build(conv_m, 2 * conv_m).inverse_mixed_form(y);
  const double fine = FirstExampleBundle::build(conv_m, 4 * conv_m).inverse_mixed_form(y);
  out.results["overlap_convergence"] = {{"M", conv_m}, {"form_2M", coarse}, {"form_4M", fine},
                                        {"difference", std::abs(coarse - fine)}};
  out.check("overlap_convergence", std::abs(coarse - fine) < conv_tol,
            "<A2^{-1} y, y> with 2M and 4M mixed modes differ by " + fmt(std::abs(coarse - fine)));
  return out;
}

Outcome counterexample_2(Params& p, Rng& rng) {
  const ExampleOptions o = read_example(p, 1.0);
  const double se_max = p.positive("stderr_max", 1e-3);
  const double z_max = p.positive("z_max", 3.0);
  const double gap_factor = p.positive("gap_factor", 10.0);
  const double limit_tol = p.positive("limit_tolerance", 1e-6);
  p.finish();

  Outcome out;
  const ExampleReport r = run_second_example(o, rng);
  out.results = example_json(r);
  const double oracle = [&] {
    auto [nodes, weights] = gauss_legendre(64, 0.0, 1.0);
    const auto b = build_basis(DomainSpec::interval(1.0), BoundaryCondition::DirichletAll, 0.0, o.truncation);
    return o.y_scale * b->evaluate_on(nodes).col(o.y_mode).dot(weights);
  }();
  out.results["phase_defect"] = r.phase_defect;
  out.results["phase_limit"] = r.phase_limit;
  out.results["phase_limit_quadrature"] = -oracle;
  out.results["phase_factor"] = complex_json(std::polar(1.0, r.phase_defect));

  check_residuals(out, r, "mu", se_max, z_max);
  for (const auto& x : r.residuals)
    if (x.control)
      out.check("negative_control", x.z_score() > z_max,
                x.function + " residual " + fmt(x.value) + " (z = " + fmt(x.z_score()) + ")");

  out.check("phase_limit", std::abs(std::abs(r.phase_limit) - std::abs(oracle)) < limit_tol,
            "|delta(inf)| = " + fmt(std::abs(r.phase_limit)) + " vs quadrature " + fmt(std::abs(oracle)));

  const SecondExampleBundle b = SecondExampleBundle::build(o.truncation);
  Eigen::VectorXd even = Eigen::VectorXd::Zero(o.truncation);
  even[1] = 1.0;
  bool even_zero = true;
  for (double t : {0.0, 0.1, 1.0, o.time, 10.0}) even_zero = even_zero && phase_defect(b, even, t) == 0.0;
  out.check("even_mode_blind", even_zero, "delta(t) for y = e_1 (sin 2 pi x) is exactly zero");
  const Eigen::VectorXd y = [&] {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(o.truncation);
    v[o.y_mode] = o.y_scale;
    return v;
  }();
  out.check("identity_at_t0", phase_defect(b, y, 0.0) == 0.0, "delta(0) = " + fmt(phase_defect(b, y, 0.0)));

  out.check("gap_monte_carlo", std::abs(r.mc_gap - r.gap) <= z_max * r.mc_gap_stderr,
            "Monte Carlo gap " + fmt(r.mc_gap) + " +- " + fmt(r.mc_gap_stderr) + " vs closed form " + fmt(r.gap));
  if (o.time > 0 && r.phase_limit != 0.0)
    out.check("gap_positive", r.gap > gap_factor * r.mc_gap_stderr,
              "gap " + fmt(r.gap) + " vs stderr " + fmt(r.mc_gap_stderr));
  return out;
}

Outcome generator_agreement(Params& p, Rng& rng) {
  const auto ms = p.numbers("truncations", {16, 32, 64});
  const int probes = p.integer("probes", 8);
  const double floor = p.positive("control_floor", 1e-3);
  const double zero_tol = p.positive("zero_tolerance", 1e-12);
  std::vector<int> truncations;
  for (double m : ms) {
    if (m < 1 || m != std::floor(m)) throw ConfigError("truncations must be positive integers");
    truncations.push_back(static_cast<int>(m));
  }
  if (truncations.size() < 2 || probes < 1) throw ConfigError("need at least two truncations and one probe");
  p.finish();

  Outcome out;
  const AgreementReport rep = generator_agreement_check(truncations, c2_suite(), random_probes(probes, rng));
  json levels = json::array();
  double control_min = INFINITY, zero_max = 0;
  for (const auto& l : rep.levels) {
    levels.push_back({{"M", l.truncation},
                      {"discrepancy", l.discrepancy},
                      {"control_discrepancy", l.control_discrepancy},
                      {"zero_state_discrepancy", l.zero_state_discrepancy}});
    control_min = std::min(control_min, l.control_discrepancy);
    zero_max = std::max(zero_max, l.zero_state_discrepancy);
  }
  out.results["levels"] = levels;
  std::string trend;
  for (const auto& l : rep.levels) trend += (trend.empty() ? "" : " > ") + fmt(l.discrepancy);
  out.check("interior_decreasing", rep.decreasing(), "discrepancy " + trend);
  out.check("eigenmode_control", control_min >= floor, "min control discrepancy " + fmt(control_min));
  out.check("zero_state", zero_max <= zero_tol, "max discrepancy at z = 0: " + fmt(zero_max));
  return out;
}

using Runner = Outcome (*)(Params&, Rng&);

struct Entry {
  ScenarioInfo info;
  Runner run;
};

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries{
      {{"basis-check", "eigenvalues against a finite-difference oracle and Gram identities"}, basis_check},
      {{"wick-suite", "Hermite orthogonality and the Wick translation identity"}, wick_suite},
      {{"sq-simulate", "one SQ trajectory to CSV with a free-variance check"}, sq_simulate},
      {{"stationarity", "time averages of the SQ process against ensemble values"}, stationarity},
      {{"ergodicity", "autocorrelation and L2 decay along stationary SQ trajectories"}, ergodicity},
      {{"invariance-suite", "integration-by-parts residuals for free and Gibbs measures"}, invariance_suite},
      {{"counterexample-1", "infinitesimally invariant but not invariant: mixed-boundary OU measure"},
       counterexample_1},
      {{"counterexample-2", "infinitesimally invariant but not invariant: shifted Dirichlet OU measure"},
       counterexample_2},
      {{"generator-agreement", "Dirichlet and mixed OU generators on interior cylinder functions"},
       generator_agreement},
  };
  return entries;
}

}  // namespace

const std::vector<ScenarioInfo>& scenario_catalog() {
  static const std::vector<ScenarioInfo> infos = [] {
    std::vector<ScenarioInfo> v;
    for (const auto& e : registry()) v.push_back(e.info);
    return v;
  }();
  return infos;
}

ScenarioResult run_scenario(const ScenarioConfig& config) {
  const auto& reg = registry();
  auto it = std::find_if(reg.begin(), reg.end(), [&](const Entry& e) { return e.info.name == config.scenario; });
  if (it == reg.end()) throw ConfigError("unknown scenario '" + config.scenario + "'");
  if (!config.seed) throw ConfigError("missing 'seed'");

  Params params(config.params);
  const std::string stem = params.text("output", config.scenario);
  if (stem.empty() || stem.find('/') != std::string::npos || stem == "." || stem == "..")
    throw ConfigError("output must be a plain file stem");

  Rng rng(*config.seed);
  Outcome outcome = it->run(params, rng);

  ScenarioResult result;
  result.scenario = config.scenario;
  result.seed = *config.seed;
  result.stem = stem;
  result.trajectory = std::move(outcome.trajectory);
  result.csv_modes = outcome.csv_modes;
  result.checks = std::move(outcome.checks);
  json checks = json::array();
  for (const auto& c : result.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  result.payload = {{"scenario", config.scenario},
                    {"seed", *config.seed},
                    {"parameters", params.resolved()},
                    {"results", std::move(outcome.results)},
                    {"checks", std::move(checks)},
                    {"passed", result.passed()}};
  return result;
}

std::string payload_text(const ScenarioResult& result) { return result.payload.dump(2) + "\n"; }

OutputFiles write_outputs(const ScenarioResult& result, const std::filesystem::path& dir, double wall_seconds) {
  std::filesystem::create_directories(dir);
  OutputFiles files;
  files.json = dir / (result.stem + ".json");
  files.meta = dir / (result.stem + ".meta.json");
  auto write = [](const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path.string());
  };
  write(files.json, payload_text(result));

  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm utc{};
  gmtime_r(&tt, &utc);
  std::ostringstream stamp;
  stamp << std::put_time(&utc, "%Y-%m-%dT%H:%M:%SZ");
  json meta = {{"scenario", result.scenario},
               {"payload", files.json.filename().string()},
               {"finished_utc", stamp.str()},
               {"wall_seconds", wall_seconds}};
  if (result.trajectory) {
    files.csv = dir / (result.stem + ".csv");
    result.trajectory->write_csv(*files.csv, result.csv_modes);
    meta["trajectory"] = files.csv->filename().string();
  }
  write(files.meta, meta.dump(2) + "\n");
  return files;
}

}  // namespace sqlab
