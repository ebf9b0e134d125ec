#include "sqlab/stats.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace sqlab {

namespace {
std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}
}  // namespace

Eigen::VectorXd autocovariance(std::span<const double> series, std::size_t max_lag,
                               std::optional<double> centre) {
  const std::size_t n = series.size();
  if (n < 2) throw std::invalid_argument("autocovariance: need at least two samples");
  max_lag = std::min(max_lag, n - 1);
  double mean = 0;
  if (centre) {
    mean = *centre;
  } else {
    for (double x : series) mean += x;
    mean /= static_cast<double>(n);
  }

  const std::size_t len = 2 * next_pow2(n);
  std::vector<double> padded(len, 0.0);
  for (std::size_t i = 0; i < n; ++i) padded[i] = series[i] - mean;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum;
  fft.fwd(spectrum, padded);
  for (auto& c : spectrum) c *= std::conj(c);
  std::vector<std::complex<double>> back;
  fft.inv(back, spectrum);

  Eigen::VectorXd out(static_cast<Eigen::Index>(max_lag + 1));
  for (std::size_t k = 0; k <= max_lag; ++k) out[static_cast<Eigen::Index>(k)] = back[k].real() / static_cast<double>(n);
  return out;
}

Eigen::VectorXd autocorrelation(std::span<const double> series, std::size_t max_lag) {
  Eigen::VectorXd acov = autocovariance(series, max_lag);
  if (!(acov[0] > 0)) return Eigen::VectorXd::Zero(acov.size());
  return acov / acov[0];
}

double integrated_autocorrelation_time(std::span<const double> series) {
  const std::size_t n = series.size();
  const Eigen::VectorXd acov = autocovariance(series, n - 1);
  if (!(acov[0] > 0)) return 1.0;
  double sum_pairs = 0;
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    const double pair = acov[static_cast<Eigen::Index>(2 * m)] + acov[static_cast<Eigen::Index>(2 * m + 1)];
    if (pair <= 0) break;
    sum_pairs += pair;
  }
  // tau = (2 sum_m Gamma_m - gamma_0) / gamma_0
  return std::max((2.0 * sum_pairs - acov[0]) / acov[0], 1.0 / static_cast<double>(n));
}

TimeAverage time_average(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 2) throw std::invalid_argument("time_average: need at least two samples");
  TimeAverage out;
  out.samples = n;
  const double shift = series[0];
  double sum = 0, sum_sq = 0;
  for (double x : series) {
    sum += x - shift;
    sum_sq += (x - shift) * (x - shift);
  }
  const double dn = static_cast<double>(n);
  const double mean_d = sum / dn;
  out.mean = shift + mean_d;
  const double var = std::max(0.0, sum_sq / dn - mean_d * mean_d);
  if (var == 0) {
    out.tau_int = 1.0;
    out.std_error = 0.0;
    return out;
  }
  out.tau_int = integrated_autocorrelation_time(series);
  out.std_error = std::sqrt(var * out.tau_int / dn);
  return out;
}

}  // namespace sqlab
