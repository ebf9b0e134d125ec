#include "sqlab/dynamics.hpp"

#include "sqlab/errors.hpp"
#include "sqlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>

namespace sqlab {

OUTransition ou_transition_kernel(const SpectralBasis& basis, double t, double theta) {
  if (!(t >= 0)) throw std::invalid_argument("ou_transition: time must be nonnegative");
  if (!(theta > 0)) throw std::invalid_argument("ou_transition: drift factor must be positive");
  OUTransition k;
  k.time = t;
  k.drift_factor = theta;
  const auto& lambda = basis.eigenvalues();
  k.decay.resize(lambda.size());
  k.variance.resize(lambda.size());
  for (Eigen::Index n = 0; n < lambda.size(); ++n) {
    const double rate = theta * lambda[n];
    k.decay[n] = std::exp(-rate * t);
    k.variance[n] = rate > 0 ? -std::expm1(-2.0 * rate * t) / (2.0 * rate) : t;
  }
  return k;
}

GaussianMeasure ou_transition(BasisPtr basis, const Eigen::VectorXd& x, double t, double theta) {
  const OUTransition k = ou_transition_kernel(*basis, t, theta);
  if (x.size() != basis->size()) throw DimensionMismatch("ou_transition: state length mismatch");
  return GaussianMeasure(std::move(basis), k.decay.cwiseProduct(x), k.variance, true);
}

std::complex<double> mehler_apply_exp(const SpectralBasis& basis, const Eigen::VectorXd& y,
                                      const Eigen::VectorXd& x, double t, double theta) {
  if (y.size() != basis.size() || x.size() != basis.size())
    throw DimensionMismatch("mehler_apply_exp: length mismatch");
  const OUTransition k = ou_transition_kernel(basis, t, theta);
  const double phase = k.decay.cwiseProduct(y).dot(x);
  const double quad = (k.variance.array() * y.array().square()).sum();
  return std::polar(std::exp(-0.5 * quad), phase);
}

Observable mode_power_observable(int n, int power) {
  Observable obs;
  obs.name = "mode" + std::to_string(n) + (power == 1 ? "" : "^" + std::to_string(power));
  obs.fn = [n, power](const Eigen::VectorXd& z) { return std::pow(z[n], power); };
  return obs;
}

Observable wick_observable(WickContext ctx, int n) {
  Observable obs;
  obs.name = ":X^" + std::to_string(n) + ":(1)";
  auto shared = std::make_shared<const WickContext>(std::move(ctx));
  obs.fn = [shared, n](const Eigen::VectorXd& z) {
    return wick_power_paired(*shared, z, n, unit_window(shared->basis()));
  };
  return obs;
}

namespace {
bool is_multiple(double value, double unit) {
  const double ratio = value / unit;
  return std::abs(ratio - std::round(ratio)) < 1e-9 * std::max(1.0, ratio);
}
}  // namespace

void SQConfig::validate() const {
  if (!basis) throw ConfigError("SQConfig: missing basis");
  if (!(step > 0)) throw ConfigError("SQConfig: step must be positive");
  if (!(horizon > 0) || !is_multiple(horizon, step))
    throw ConfigError("SQConfig: horizon must be a positive multiple of step");
  if (record_interval < 0 || (record_interval > 0 && !is_multiple(record_interval, step)))
    throw ConfigError("SQConfig: record interval must be a multiple of step");
  if (drift_factor != 0.5 && drift_factor != 1.0)
    throw ConfigError("SQConfig: drift factor must be 1/2 or 1");
  if ((basis->eigenvalues().array() <= 0).any())
    throw ConfigError("SQConfig: operator must have strictly positive eigenvalues");
  const double lambda_max = basis->eigenvalues().maxCoeff();
  if (step > stability_factor / lambda_max)
    throw ConfigError("SQConfig: step " + std::to_string(step) + " exceeds stability guard " +
                      std::to_string(stability_factor / lambda_max));
  if (polynomial && !polynomial->is_admissible_potential())
    throw ConfigError("SQConfig: polynomial needs even degree and positive leading coefficient");
  if (initial && initial->size() != basis->size())
    throw ConfigError("SQConfig: initial state length does not match basis");
}

std::size_t SQConfig::steps_in(double time) const {
  if (!is_multiple(time, step)) throw ConfigError("time is not a multiple of the step");
  return static_cast<std::size_t>(std::llround(time / step));
}

void Trajectory::write_csv(const std::filesystem::path& path, int mode_columns) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "time";
  const int modes = states.empty() ? 0 : std::min<int>(mode_columns, static_cast<int>(states.front().size()));
  for (int n = 0; n < modes; ++n) out << ",mode_" << n;
  for (const auto& name : names) out << ',' << name;
  out << '\n';
  out << std::setprecision(17);
  for (std::size_t i = 0; i < times.size(); ++i) {
    out << times[i];
    for (int n = 0; n < modes; ++n) out << ',' << states[i][n];
    for (const auto& s : series) out << ',' << s[i];
    out << '\n';
  }
}

SQIntegrator::SQIntegrator(SQConfig config)
    : config_((config.validate(), std::move(config))),
      wick_(config_.basis, config_.basis->eigenvalues().cwiseInverse()) {
  const auto& lambda = config_.basis->eigenvalues();
  const double h = config_.step, theta = config_.drift_factor;
  decay_.resize(lambda.size());
  gain_.resize(lambda.size());
  noise_std_.resize(lambda.size());
  for (Eigen::Index n = 0; n < lambda.size(); ++n) {
    const double rate = theta * lambda[n];
    decay_[n] = std::exp(-rate * h);
    gain_[n] = -std::expm1(-rate * h) / rate;
    noise_std_[n] = std::sqrt(-std::expm1(-2.0 * rate * h) / (2.0 * rate));
  }
  if (config_.polynomial) drift_poly_ = wick_drift_polynomial(*config_.polynomial);
  window_ = unit_window(*config_.basis);
  record_every_ = config_.record_interval > 0 ? config_.steps_in(config_.record_interval) : 1;
}

Eigen::VectorXd SQIntegrator::drift(const Eigen::VectorXd& state) const {
  if (!drift_poly_) return Eigen::VectorXd::Zero(state.size());
  const Eigen::VectorXd v = basis().synthesize(state);
  const Eigen::VectorXd pointwise = wick_polynomial_pointwise(wick_, *drift_poly_, v);
  return -config_.drift_factor * basis().analyze(pointwise);
}

void SQIntegrator::advance(Eigen::VectorXd& state, Rng& rng, double time) const {
  std::normal_distribution<double> normal;
  if (drift_poly_) {
    const Eigen::VectorXd d = drift(state);
    for (Eigen::Index n = 0; n < state.size(); ++n)
      state[n] = decay_[n] * state[n] + gain_[n] * d[n] + noise_std_[n] * normal(rng);
  } else {
    for (Eigen::Index n = 0; n < state.size(); ++n)
      state[n] = decay_[n] * state[n] + noise_std_[n] * normal(rng);
  }
  if (!state.allFinite()) {
    for (Eigen::Index n = 0; n < state.size(); ++n)
      if (!std::isfinite(state[n])) throw DivergenceError(static_cast<int>(n), time + config_.step);
  }
}

Trajectory SQIntegrator::run(Eigen::VectorXd state, double horizon, Rng& rng, bool keep_states) const {
  if (state.size() != basis().size()) throw DimensionMismatch("initial state length mismatch");
  const std::size_t total = config_.steps_in(horizon);
  Trajectory traj;
  for (const auto& obs : config_.observables) traj.names.push_back(obs.name);
  traj.series.resize(config_.observables.size());
  const std::size_t records = total / record_every_ + 1;
  traj.times.reserve(records);
  for (auto& s : traj.series) s.reserve(records);
  if (keep_states) traj.states.reserve(records);

  auto record = [&](std::size_t k) {
    traj.times.push_back(static_cast<double>(k) * config_.step);
    if (keep_states) traj.states.push_back(state);
    for (std::size_t j = 0; j < config_.observables.size(); ++j)
      traj.series[j].push_back(config_.observables[j].fn(state));
  };
  record(0);
  for (std::size_t k = 1; k <= total; ++k) {
    advance(state, rng, static_cast<double>(k - 1) * config_.step);
    if (k % record_every_ == 0) record(k);
  }
  return traj;
}

Eigen::VectorXd step(const Eigen::VectorXd& state, const SQConfig& config, Rng& rng) {
  SQIntegrator integrator(config);
  Eigen::VectorXd next = state;
  integrator.advance(next, rng);
  return next;
}

Trajectory simulate(const SQConfig& config, Rng& rng) {
  SQIntegrator integrator(config);
  Eigen::VectorXd initial =
      config.initial ? *config.initial : Eigen::VectorXd::Zero(config.basis->size());
  return integrator.run(std::move(initial), config.horizon, rng);
}

GibbsMeasure target_measure(const SQConfig& config) {
  return GibbsMeasure(GaussianMeasure::free_field(config.basis), config.polynomial);
}

Eigen::VectorXd stationary_sample(const SQConfig& config, Rng& rng, std::size_t pool) {
  const GaussianMeasure free = GaussianMeasure::free_field(config.basis);
  if (!config.polynomial) return sample(free, rng);
  const GibbsMeasure gibbs = target_measure(config);
  std::vector<Eigen::VectorXd> candidates;
  std::vector<double> log_w;
  candidates.reserve(pool);
  for (std::size_t i = 0; i < pool; ++i) {
    candidates.push_back(sample(free, rng));
    log_w.push_back(-gibbs.energy(candidates.back()));
  }
  const double max_log = *std::max_element(log_w.begin(), log_w.end());
  std::vector<double> w;
  for (double lw : log_w) w.push_back(std::exp(lw - max_log));
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  return candidates[pick(rng)];
}

std::vector<StationarityRecord> stationarity_report(const SQConfig& config, double burn_in,
                                                   std::size_t ensemble_samples, Rng& rng) {
  if (!(burn_in >= 0) || !(burn_in < config.horizon))
    throw ConfigError("stationarity_report: burn-in must lie in [0, horizon)");
  SQIntegrator integrator(config);
  Eigen::VectorXd initial =
      config.initial ? *config.initial : Eigen::VectorXd::Zero(config.basis->size());
  const Trajectory traj = integrator.run(std::move(initial), config.horizon, rng, false);

  std::size_t first = 0;
  while (first < traj.times.size() && traj.times[first] < burn_in - 1e-12) ++first;

  std::vector<FieldFunction> fns;
  std::vector<std::size_t> sampled;
  for (std::size_t j = 0; j < config.observables.size(); ++j) {
    if (config.observables[j].exact_mean) continue;
    fns.push_back(config.observables[j].fn);
    sampled.push_back(j);
  }
  std::vector<Estimate> ensemble(config.observables.size());
  if (!fns.empty()) {
    if (ensemble_samples == 0) throw ConfigError("stationarity_report: ensemble samples required");
    const auto est = expectations(target_measure(config), fns, ensemble_samples, rng);
    for (std::size_t i = 0; i < sampled.size(); ++i) ensemble[sampled[i]] = est[i];
  }
  for (std::size_t j = 0; j < config.observables.size(); ++j)
    if (config.observables[j].exact_mean) ensemble[j].value = *config.observables[j].exact_mean;

  std::vector<StationarityRecord> out;
  for (std::size_t j = 0; j < config.observables.size(); ++j) {
    const std::span<const double> tail(traj.series[j].data() + first, traj.series[j].size() - first);
    const TimeAverage ta = time_average(tail);
    StationarityRecord r;
    r.observable = config.observables[j].name;
    r.time_avg = ta.mean;
    r.time_stderr = ta.std_error;
    r.tau_int = ta.tau_int;
    r.ensemble_avg = ensemble[j].value;
    r.ensemble_stderr = ensemble[j].std_error;
    const double combined = std::hypot(r.time_stderr, r.ensemble_stderr);
    r.z_score = combined > 0 ? std::abs(r.time_avg - r.ensemble_avg) / combined
                             : (r.time_avg == r.ensemble_avg ? 0.0 : INFINITY);
    out.push_back(r);
  }
  return out;
}

ErgodicityReport ergodicity_report(const SQConfig& config, const Observable& observable,
                                   const ErgodicityOptions& options, Rng& rng) {
  SQConfig cfg = config;
  cfg.observables = {observable};
  if (cfg.record_interval <= 0) cfg.record_interval = cfg.step;
  const SQIntegrator integrator(cfg);
  ErgodicityReport report;

  // Autocorrelation pooled over stationary replicas.
  std::vector<std::vector<double>> runs;
  double pooled_sum = 0;
  std::size_t pooled_n = 0;
  for (std::size_t r = 0; r < options.replicas; ++r) {
    Trajectory traj = integrator.run(stationary_sample(cfg, rng), options.replica_horizon, rng, false);
    for (double x : traj.series[0]) pooled_sum += x;
    pooled_n += traj.series[0].size();
    runs.push_back(std::move(traj.series[0]));
  }
  const double pooled_mean = pooled_n ? pooled_sum / static_cast<double>(pooled_n) : 0.0;
  const std::size_t max_lag = static_cast<std::size_t>(std::llround(options.max_lag / cfg.record_interval));
  Eigen::VectorXd acov = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(max_lag + 1));
  for (const auto& run : runs) {
    const Eigen::VectorXd c = autocovariance(run, max_lag, pooled_mean);
    acov.head(c.size()) += c * static_cast<double>(run.size());
  }
  for (std::size_t k = 0; k <= max_lag; ++k) {
    report.lags.push_back(static_cast<double>(k) * cfg.record_interval);
    report.autocorrelation.push_back(acov[0] > 0 ? acov[static_cast<Eigen::Index>(k)] / acov[0] : 0.0);
  }

  // ||T_t f - mean||_{L^2} from nested ensembles, with the inner sampling
  // variance subtracted.
  report.l2_times = options.l2_times;
  const double t_max = options.l2_times.empty()
                           ? 0.0
                           : *std::max_element(options.l2_times.begin(), options.l2_times.end());
  std::vector<std::size_t> record_index;
  for (double t : options.l2_times) record_index.push_back(cfg.steps_in(t) / cfg.steps_in(cfg.record_interval));
  const std::size_t m = options.l2_times.size();
  std::vector<std::vector<double>> outer_mean(m), outer_var(m);
  bool have_shift = false;
  double shift = 0;
  for (std::size_t i = 0; i < options.outer; ++i) {
    const Eigen::VectorXd start = stationary_sample(cfg, rng);
    std::vector<double> sum(m, 0.0), sum_sq(m, 0.0);
    for (std::size_t j = 0; j < options.inner; ++j) {
      const Trajectory traj = integrator.run(start, t_max > 0 ? t_max : cfg.record_interval, rng, false);
      for (std::size_t q = 0; q < m; ++q) {
        const double f = traj.series[0][record_index[q]];
        if (!have_shift) {
          shift = f;
          have_shift = true;
        }
        sum[q] += f - shift;
        sum_sq[q] += (f - shift) * (f - shift);
      }
    }
    const double n_in = static_cast<double>(options.inner);
    for (std::size_t q = 0; q < m; ++q) {
      const double mean = sum[q] / n_in;
      outer_mean[q].push_back(mean);
      outer_var[q].push_back(n_in > 1 ? std::max(0.0, (sum_sq[q] - n_in * mean * mean) / (n_in - 1)) : 0.0);
    }
  }
  for (std::size_t q = 0; q < m; ++q) {
    const double n_out = static_cast<double>(outer_mean[q].size());
    double grand = 0;
    for (double v : outer_mean[q]) grand += v;
    grand /= n_out;
    double spread = 0, noise = 0;
    for (std::size_t i = 0; i < outer_mean[q].size(); ++i) {
      spread += (outer_mean[q][i] - grand) * (outer_mean[q][i] - grand);
      noise += outer_var[q][i] / static_cast<double>(options.inner);
    }
    report.l2_distance.push_back(std::sqrt(std::max(0.0, (spread - noise) / n_out)));
  }
  return report;
}

}  // namespace sqlab
