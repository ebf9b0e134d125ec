#include "sqlab/measures.hpp"

#include "sqlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace sqlab {

GaussianMeasure::GaussianMeasure(BasisPtr basis, Eigen::VectorXd mean, Eigen::VectorXd covariance,
                                 bool allow_degenerate)
    : basis_(std::move(basis)), mean_(std::move(mean)), covariance_(std::move(covariance)) {
  if (!basis_) throw std::invalid_argument("GaussianMeasure: null basis");
  if (mean_.size() != basis_->size() || covariance_.size() != basis_->size())
    throw DimensionMismatch("GaussianMeasure: mean/covariance length does not match basis");
  if (!covariance_.allFinite() || (covariance_.array() < 0).any())
    throw std::invalid_argument("GaussianMeasure: covariance must be finite and nonnegative");
  if (!allow_degenerate && (covariance_.array() == 0).any())
    throw std::invalid_argument("GaussianMeasure: covariance must be positive");
}

GaussianMeasure GaussianMeasure::free_field(BasisPtr basis) {
  if (!basis) throw std::invalid_argument("free_field: null basis");
  if ((basis->eigenvalues().array() <= 0).any())
    throw SingularPower("free field needs strictly positive eigenvalues");
  Eigen::VectorXd cov = basis->eigenvalues().cwiseInverse();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(basis->size());
  return GaussianMeasure(std::move(basis), std::move(mean), std::move(cov));
}

GaussianMeasure GaussianMeasure::ou_invariant(BasisPtr basis) {
  if (!basis) throw std::invalid_argument("ou_invariant: null basis");
  if ((basis->eigenvalues().array() <= 0).any())
    throw SingularPower("OU invariant measure needs strictly positive eigenvalues");
  Eigen::VectorXd cov = 0.5 * basis->eigenvalues().cwiseInverse();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(basis->size());
  return GaussianMeasure(std::move(basis), std::move(mean), std::move(cov));
}

GaussianMeasure GaussianMeasure::with_mean(Eigen::VectorXd mean) const {
  return GaussianMeasure(basis_, std::move(mean), covariance_, is_degenerate());
}

Eigen::VectorXd sample(const GaussianMeasure& measure, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(measure.size());
  const auto& m = measure.mean();
  const auto& c = measure.covariance();
  for (int n = 0; n < measure.size(); ++n) z[n] = m[n] + std::sqrt(c[n]) * normal(rng);
  return z;
}

std::complex<double> characteristic_functional(const GaussianMeasure& measure,
                                               const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (y.size() != measure.size()) throw DimensionMismatch("characteristic_functional: length mismatch");
  const double phase = y.dot(measure.mean());
  const double quad = (measure.covariance().array() * y.array().square()).sum();
  return std::polar(std::exp(-0.5 * quad), phase);
}

GibbsMeasure::GibbsMeasure(GaussianMeasure base, std::optional<WickPolynomial> potential,
                           std::optional<Eigen::VectorXd> window)
    : base_(std::move(base)),
      potential_(std::move(potential)),
      window_(window ? std::move(*window) : unit_window(base_.basis())),
      wick_(base_.basis_ptr(), base_.covariance()) {
  if (potential_) potential_->validate_potential();
  if (window_.size() != base_.basis().grid_size())
    throw DimensionMismatch("GibbsMeasure: window does not match quadrature grid");
  if ((window_.array() < 0).any()) throw std::invalid_argument("GibbsMeasure: window must be nonnegative");
}

double GibbsMeasure::energy(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  if (!potential_) return 0.0;
  return wick_polynomial_pair(wick_, *potential_, z, window_);
}

Eigen::VectorXd GibbsMeasure::energy_gradient(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  if (!potential_) return Eigen::VectorXd::Zero(z.size());
  return wick_potential_gradient(wick_, *potential_, z, window_);
}

namespace {

void require_samples(std::size_t n) {
  if (n < 2) throw std::invalid_argument("Monte-Carlo estimates need at least two samples");
}

// Running sums of shifted values; the shift by the first sample keeps
// constant observables exact.
struct WeightedAccumulator {
  double shift = 0;
  bool has_shift = false;
  double sum_wf = 0;

  void add(double w, double f) {
    if (!has_shift) {
      shift = f;
      has_shift = true;
    }
    sum_wf += w * (f - shift);
  }
};

}  // namespace

std::vector<Estimate> expectations(const GaussianMeasure& measure,
                                   std::span<const FieldFunction> observables,
                                   std::size_t n_samples, Rng& rng) {
  require_samples(n_samples);
  const std::size_t k = observables.size();
  std::vector<double> shift(k, 0.0), sum(k, 0.0), sum_sq(k, 0.0);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const Eigen::VectorXd z = sample(measure, rng);
    for (std::size_t j = 0; j < k; ++j) {
      const double f = observables[j](z);
      if (i == 0) shift[j] = f;
      const double d = f - shift[j];
      sum[j] += d;
      sum_sq[j] += d * d;
    }
  }
  std::vector<Estimate> out(k);
  const double n = static_cast<double>(n_samples);
  for (std::size_t j = 0; j < k; ++j) {
    const double mean_d = sum[j] / n;
    const double var = std::max(0.0, (sum_sq[j] - n * mean_d * mean_d) / (n - 1));
    out[j].value = shift[j] + mean_d;
    out[j].std_error = std::sqrt(var / n);
    out[j].effective_sample_size = n;
    out[j].samples = n_samples;
  }
  return out;
}

std::vector<Estimate> expectations(const GibbsMeasure& measure,
                                   std::span<const FieldFunction> observables,
                                   std::size_t n_samples, Rng& rng) {
  if (!measure.potential()) return expectations(measure.base(), observables, n_samples, rng);
  require_samples(n_samples);
  const std::size_t k = observables.size();
  std::vector<double> log_w(n_samples);
  std::vector<std::vector<double>> values(k, std::vector<double>(n_samples));
  for (std::size_t i = 0; i < n_samples; ++i) {
    const Eigen::VectorXd z = sample(measure.base(), rng);
    log_w[i] = -measure.energy(z);
    if (!std::isfinite(log_w[i]))
      throw NumericalDegeneracy("non-finite Gibbs energy; consider reducing the coupling");
    for (std::size_t j = 0; j < k; ++j) values[j][i] = observables[j](z);
  }
  const double max_log = *std::max_element(log_w.begin(), log_w.end());
  std::vector<double> w(n_samples);
  double sum_w = 0, max_w = 0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    w[i] = std::exp(log_w[i] - max_log);
    sum_w += w[i];
    max_w = std::max(max_w, w[i]);
  }
  if (!(sum_w > 0) || !std::isfinite(sum_w))
    throw NumericalDegeneracy("importance weights degenerate; consider reducing the coupling");

  std::vector<Estimate> out(k);
  for (std::size_t j = 0; j < k; ++j) {
    WeightedAccumulator acc;
    for (std::size_t i = 0; i < n_samples; ++i) acc.add(w[i], values[j][i]);
    const double mean_d = acc.sum_wf / sum_w;
    double var_num = 0;
    for (std::size_t i = 0; i < n_samples; ++i) {
      const double d = values[j][i] - acc.shift - mean_d;
      var_num += w[i] * w[i] * d * d;
    }
    out[j].value = acc.shift + mean_d;
    out[j].std_error = std::sqrt(var_num) / sum_w;
    out[j].effective_sample_size = sum_w / max_w;
    out[j].samples = n_samples;
  }
  return out;
}

Estimate expectation(const GaussianMeasure& measure, const FieldFunction& f,
                     std::size_t n_samples, Rng& rng) {
  return expectations(measure, std::span<const FieldFunction>(&f, 1), n_samples, rng).front();
}

Estimate expectation(const GibbsMeasure& measure, const FieldFunction& f,
                     std::size_t n_samples, Rng& rng) {
  return expectations(measure, std::span<const FieldFunction>(&f, 1), n_samples, rng).front();
}

Estimate gibbs_expectation(const GibbsMeasure& measure, const FieldFunction& f,
                           std::size_t n_samples, Rng& rng) {
  return expectation(measure, f, n_samples, rng);
}

FieldFunction log_derivative(const GaussianMeasure& measure, Eigen::VectorXd k) {
  if (k.size() != measure.size()) throw DimensionMismatch("log_derivative: direction length mismatch");
  if (measure.is_degenerate()) throw std::invalid_argument("log_derivative: degenerate measure");
  Eigen::VectorXd scaled = k.cwiseQuotient(measure.covariance());
  Eigen::VectorXd mean = measure.mean();
  return [scaled = std::move(scaled), mean = std::move(mean)](const Eigen::VectorXd& z) {
    return -scaled.dot(z - mean);
  };
}

FieldFunction log_derivative(const GibbsMeasure& measure, Eigen::VectorXd k) {
  FieldFunction gaussian = log_derivative(measure.base(), k);
  if (!measure.potential()) return gaussian;
  // sum_n n a_n :z^{n-1}:(k h) = integral of :P'(z): (k h)
  const WickPolynomial drift = wick_drift_polynomial(*measure.potential());
  Eigen::VectorXd kh = measure.base().basis().synthesize(k).cwiseProduct(measure.window());
  auto m = std::make_shared<const GibbsMeasure>(measure);
  return [gaussian = std::move(gaussian), drift, kh = std::move(kh), m](const Eigen::VectorXd& z) {
    const Eigen::VectorXd v = m->base().basis().synthesize(z);
    const double pairing =
        m->base().basis().integrate(wick_polynomial_pointwise(m->wick(), drift, v).cwiseProduct(kh));
    return gaussian(z) - pairing;
  };
}

namespace {
template <class Measure>
Estimate ibp_impl(const Measure& measure, const CylinderFunction& u, const Eigen::VectorXd& k,
                  std::size_t n_samples, Rng& rng) {
  FieldFunction beta = log_derivative(measure, k);
  FieldFunction integrand = [&](const Eigen::VectorXd& z) {
    return u.directional(z, k) + u.eval(z) * beta(z);
  };
  return expectation(measure, integrand, n_samples, rng);
}
}  // namespace

Estimate ibp_residual(const GaussianMeasure& measure, const CylinderFunction& u,
                      const Eigen::VectorXd& k, std::size_t n_samples, Rng& rng) {
  return ibp_impl(measure, u, k, n_samples, rng);
}

Estimate ibp_residual(const GibbsMeasure& measure, const CylinderFunction& u,
                      const Eigen::VectorXd& k, std::size_t n_samples, Rng& rng) {
  return ibp_impl(measure, u, k, n_samples, rng);
}

}  // namespace sqlab
