#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>

namespace sqlab {

/// Biased (1/n) autocovariance at lags 0..max_lag, computed by FFT. The
/// series is centred on `mean` when given, otherwise on its sample mean.
Eigen::VectorXd autocovariance(std::span<const double> series, std::size_t max_lag,
                               std::optional<double> mean = std::nullopt);

/// Autocovariance normalized by its lag-0 value.
Eigen::VectorXd autocorrelation(std::span<const double> series, std::size_t max_lag);

/// Integrated autocorrelation time 1 + 2 sum_{t>=1} rho_t in units of the
/// sampling interval, truncated by Geyer's initial positive sequence rule.
double integrated_autocorrelation_time(std::span<const double> series);

struct TimeAverage {
  double mean = 0;
  double std_error = 0;
  double tau_int = 1;
  std::size_t samples = 0;
};

/// Sample mean with standard error inflated by the integrated autocorrelation time.
TimeAverage time_average(std::span<const double> series);

}  // namespace sqlab
