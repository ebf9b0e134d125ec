#pragma once

#include "sqlab/cylinder_function.hpp"
#include "sqlab/spectral.hpp"
#include "sqlab/wick.hpp"

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace sqlab {

using Rng = std::mt19937_64;
using FieldFunction = std::function<double(const Eigen::VectorXd&)>;

/// Monte-Carlo estimate with its standard error.
struct Estimate {
  double value = 0;
  double std_error = 0;
  double effective_sample_size = 0;
  std::size_t samples = 0;
};

/// Gaussian measure with diagonal covariance in the coefficients of a basis.
class GaussianMeasure {
 public:
  GaussianMeasure(BasisPtr basis, Eigen::VectorXd mean, Eigen::VectorXd covariance,
                  bool allow_degenerate = false);

  /// Free field: covariance (-Laplacian + m)^{-1}, i.e. c_n = 1 / lambda_n.
  static GaussianMeasure free_field(BasisPtr basis);
  /// Invariant law of dX = -A X dt + dW: covariance (1/2) A^{-1}.
  static GaussianMeasure ou_invariant(BasisPtr basis);

  GaussianMeasure with_mean(Eigen::VectorXd mean) const;

  const SpectralBasis& basis() const { return *basis_; }
  const BasisPtr& basis_ptr() const { return basis_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& covariance() const { return covariance_; }
  int size() const { return static_cast<int>(mean_.size()); }
  bool is_degenerate() const { return (covariance_.array() == 0).any(); }

 private:
  BasisPtr basis_;
  Eigen::VectorXd mean_;
  Eigen::VectorXd covariance_;
};

/// m + (sqrt(c_n) xi_n)_n with independent standard normals xi_n.
Eigen::VectorXd sample(const GaussianMeasure& measure, Rng& rng);

/// exp(i <y, m> - 1/2 sum_n c_n y_n^2)
std::complex<double> characteristic_functional(const GaussianMeasure& measure,
                                               const Eigen::Ref<const Eigen::VectorXd>& y);

/// Gaussian base reweighted by exp(-V), V(z) = :P(z):(h). Without a
/// potential it coincides with the base.
class GibbsMeasure {
 public:
  GibbsMeasure(GaussianMeasure base, std::optional<WickPolynomial> potential,
               std::optional<Eigen::VectorXd> window = std::nullopt);

  const GaussianMeasure& base() const { return base_; }
  const std::optional<WickPolynomial>& potential() const { return potential_; }
  const Eigen::VectorXd& window() const { return window_; }
  const WickContext& wick() const { return wick_; }

  /// V(z); zero without a potential.
  double energy(const Eigen::Ref<const Eigen::VectorXd>& z) const;
  /// Gradient of V in field coefficients.
  Eigen::VectorXd energy_gradient(const Eigen::Ref<const Eigen::VectorXd>& z) const;

 private:
  GaussianMeasure base_;
  std::optional<WickPolynomial> potential_;
  Eigen::VectorXd window_;
  WickContext wick_;
};

/// Plain Monte-Carlo means of several observables on shared samples.
std::vector<Estimate> expectations(const GaussianMeasure& measure,
                                   std::span<const FieldFunction> observables,
                                   std::size_t n_samples, Rng& rng);
/// Self-normalized importance sampling against the Gaussian base with
/// weights exp(-V). Standard errors by the delta method.
std::vector<Estimate> expectations(const GibbsMeasure& measure,
                                   std::span<const FieldFunction> observables,
                                   std::size_t n_samples, Rng& rng);

Estimate expectation(const GaussianMeasure& measure, const FieldFunction& f,
                     std::size_t n_samples, Rng& rng);
Estimate expectation(const GibbsMeasure& measure, const FieldFunction& f,
                     std::size_t n_samples, Rng& rng);

Estimate gibbs_expectation(const GibbsMeasure& measure, const FieldFunction& f,
                           std::size_t n_samples, Rng& rng);

/// beta_k(z) = -<C^{-1} k, z - m>
FieldFunction log_derivative(const GaussianMeasure& measure, Eigen::VectorXd k);
/// Gaussian part minus sum_n n a_n :z^{n-1}:(k h).
FieldFunction log_derivative(const GibbsMeasure& measure, Eigen::VectorXd k);

/// Estimate of  int du/dk dmu + int u beta_k dmu,  zero for exact measures.
Estimate ibp_residual(const GaussianMeasure& measure, const CylinderFunction& u,
                      const Eigen::VectorXd& k, std::size_t n_samples, Rng& rng);
Estimate ibp_residual(const GibbsMeasure& measure, const CylinderFunction& u,
                      const Eigen::VectorXd& k, std::size_t n_samples, Rng& rng);

}  // namespace sqlab
