#pragma once

#include "sqlab/measures.hpp"
#include "sqlab/spectral.hpp"
#include "sqlab/wick.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sqlab {

/// Per-mode transition of dX = -theta A X dt + dW over time t:
/// mean factor exp(-theta lambda_n t), variance (1 - exp(-2 theta lambda_n t)) / (2 theta lambda_n).
struct OUTransition {
  double time = 0;
  double drift_factor = 1;
  Eigen::VectorXd decay;
  Eigen::VectorXd variance;
};

OUTransition ou_transition_kernel(const SpectralBasis& basis, double t, double theta);

/// Law of X_t given X_0 = x. Degenerate (zero covariance) at t = 0.
GaussianMeasure ou_transition(BasisPtr basis, const Eigen::VectorXd& x, double t, double theta);

/// p_t f(x) for f = exp(i <y, .>).
std::complex<double> mehler_apply_exp(const SpectralBasis& basis, const Eigen::VectorXd& y,
                                      const Eigen::VectorXd& x, double t, double theta);

struct Observable {
  std::string name;
  FieldFunction fn;
  /// Known stationary mean; replaces the ensemble estimate when set.
  std::optional<double> exact_mean;
};

/// <e_n, X>^power
Observable mode_power_observable(int n, int power);
/// :X^n:(1_domain) with Wick ordering relative to `ctx`.
Observable wick_observable(WickContext ctx, int n);

/// Finite-volume stochastic quantization
///   dX = -drift_factor [A X + :P'(X):] dt + dW
/// integrated by exponential Euler (exact linear part, explicit Wick drift).
struct SQConfig {
  BasisPtr basis;
  std::optional<WickPolynomial> polynomial;
  double step = 1e-3;
  double horizon = 1.0;
  double drift_factor = 0.5;
  /// Recording interval; 0 records every step.
  double record_interval = 0;
  /// Step-size guard: step <= stability_factor / lambda_max.
  double stability_factor = 0.5;
  std::optional<Eigen::VectorXd> initial;
  std::vector<Observable> observables;

  void validate() const;
  /// Number of integration steps in `time` (which must be a multiple of step).
  std::size_t steps_in(double time) const;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<std::string> names;
  std::vector<std::vector<double>> series;

  /// CSV with columns time, mode_0..mode_{k-1}, observables.
  void write_csv(const std::filesystem::path& path, int mode_columns) const;
};

class SQIntegrator {
 public:
  explicit SQIntegrator(SQConfig config);

  const SQConfig& config() const { return config_; }
  const SpectralBasis& basis() const { return *config_.basis; }
  /// Wick context of the free field used for the drift.
  const WickContext& wick() const { return wick_; }

  /// Deterministic increment factor d_n = -drift_factor * <:P'(X):, e_n>.
  Eigen::VectorXd drift(const Eigen::VectorXd& state) const;
  /// One exponential-Euler step in place. Throws DivergenceError on a
  /// non-finite result.
  void advance(Eigen::VectorXd& state, Rng& rng, double time = 0) const;

  /// Runs `horizon` time units from `initial`, recording every
  /// config().record_interval.
  Trajectory run(Eigen::VectorXd initial, double horizon, Rng& rng, bool keep_states = true) const;

  const Eigen::VectorXd& decay() const { return decay_; }
  const Eigen::VectorXd& drift_gain() const { return gain_; }
  const Eigen::VectorXd& noise_std() const { return noise_std_; }

 private:
  SQConfig config_;
  WickContext wick_;
  std::optional<WickPolynomial> drift_poly_;
  Eigen::VectorXd window_;
  Eigen::VectorXd decay_;
  Eigen::VectorXd gain_;
  Eigen::VectorXd noise_std_;
  std::size_t record_every_ = 1;
};

Eigen::VectorXd step(const Eigen::VectorXd& state, const SQConfig& config, Rng& rng);
Trajectory simulate(const SQConfig& config, Rng& rng);

/// Gibbs measure the dynamics is designed to leave invariant.
GibbsMeasure target_measure(const SQConfig& config);

/// Draw from the target measure: exact for the free field, otherwise
/// sampling-importance-resampling from a pool of free-field draws.
Eigen::VectorXd stationary_sample(const SQConfig& config, Rng& rng, std::size_t pool = 256);

struct StationarityRecord {
  std::string observable;
  double time_avg = 0;
  double time_stderr = 0;
  double tau_int = 0;
  double ensemble_avg = 0;
  double ensemble_stderr = 0;
  double z_score = 0;
};

/// Compares post-burn-in time averages with importance-sampling ensemble
/// values (or exact means where the observable carries one).
std::vector<StationarityRecord> stationarity_report(const SQConfig& config, double burn_in,
                                                   std::size_t ensemble_samples, Rng& rng);

struct ErgodicityOptions {
  std::size_t replicas = 16;
  double replica_horizon = 100;
  double max_lag = 5;
  std::size_t outer = 32;
  std::size_t inner = 32;
  std::vector<double> l2_times{0.0, 1.0, 2.0, 4.0};
};

struct ErgodicityReport {
  std::vector<double> lags;
  std::vector<double> autocorrelation;
  std::vector<double> l2_times;
  std::vector<double> l2_distance;
};

/// Autocorrelation of an observable along stationary trajectories and the
/// ensemble estimate of ||T_t f - E f||_{L^2}.
ErgodicityReport ergodicity_report(const SQConfig& config, const Observable& observable,
                                   const ErgodicityOptions& options, Rng& rng);

}  // namespace sqlab
