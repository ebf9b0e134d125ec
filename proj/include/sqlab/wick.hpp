#pragma once

#include "sqlab/spectral.hpp"

#include <Eigen/Dense>

#include <vector>

namespace sqlab {

/// Probabilists' Hermite polynomial He_n(t) via He_{n+1} = t He_n - n He_{n-1}.
template <typename Scalar>
Scalar hermite(int n, Scalar t) {
  if (n <= 0) return Scalar(1);
  Scalar prev = Scalar(1), cur = t;
  for (int k = 1; k < n; ++k) {
    const Scalar next = t * cur - Scalar(k) * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

/// Scaled Hermite value c^{n/2} He_n(v / sqrt(c)), evaluated through the
/// recurrence W_{k+1} = v W_k - k c W_{k-1} so that c -> 0 gives v^n.
template <typename Scalar>
Scalar wick_monomial(int n, Scalar v, Scalar c) {
  if (n <= 0) return Scalar(1);
  Scalar prev = Scalar(1), cur = v;
  for (int k = 1; k < n; ++k) {
    const Scalar next = v * cur - Scalar(k) * c * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

/// Coefficients a_0..a_d of a polynomial used inside Wick ordering.
struct WickPolynomial {
  std::vector<double> coefficients;

  int degree() const { return static_cast<int>(coefficients.size()) - 1; }
  double leading() const { return coefficients.empty() ? 0.0 : coefficients.back(); }
  /// Even positive degree with positive leading coefficient.
  bool is_admissible_potential() const;
  /// Throws std::invalid_argument unless is_admissible_potential().
  void validate_potential() const;

  static WickPolynomial monomial(int degree, double coefficient);
};

/// Formal derivative: coefficients (n a_n) shifted down one degree.
WickPolynomial wick_drift_polynomial(const WickPolynomial& poly);

/// Reference Gaussian used for Wick ordering: basis, per-mode variances and
/// the local variance c(x) = sum_n c_n e_n(x)^2 on the quadrature grid.
class WickContext {
 public:
  WickContext(BasisPtr basis, Eigen::VectorXd covariance);

  const SpectralBasis& basis() const { return *basis_; }
  const BasisPtr& basis_ptr() const { return basis_; }
  const Eigen::VectorXd& covariance() const { return covariance_; }
  const Eigen::VectorXd& local_variance() const { return local_variance_; }

  /// Recomputes c(x) from basis and covariance.
  Eigen::VectorXd recompute_local_variance() const;

 private:
  BasisPtr basis_;
  Eigen::VectorXd covariance_;
  Eigen::VectorXd local_variance_;
};

/// :v^n:(x) = c(x)^{n/2} He_n(c(x)^{-1/2} v(x)) on the grid.
Eigen::VectorXd wick_power_pointwise(const WickContext& ctx,
                                     const Eigen::Ref<const Eigen::VectorXd>& v, int n);

/// :z^n:(h) = integral of :z^n:(x) h(x) for field coefficients z.
double wick_power_paired(const WickContext& ctx, const Eigen::Ref<const Eigen::VectorXd>& z,
                         int n, const Eigen::Ref<const Eigen::VectorXd>& window);

struct TranslationCheck {
  double lhs = 0;
  double rhs = 0;
  double abs_error = 0;
};

/// Compares :(z+k)^n:(h) with sum_m C(n,m) :z^m:(k^{n-m} h).
TranslationCheck wick_translate_check(const WickContext& ctx,
                                      const Eigen::Ref<const Eigen::VectorXd>& z,
                                      const Eigen::Ref<const Eigen::VectorXd>& k, int n,
                                      const Eigen::Ref<const Eigen::VectorXd>& window);

/// sum_n a_n :z^n:(h)
double wick_polynomial_pair(const WickContext& ctx, const WickPolynomial& poly,
                            const Eigen::Ref<const Eigen::VectorXd>& z,
                            const Eigen::Ref<const Eigen::VectorXd>& window);

/// Pointwise :P(v):(x) on the grid.
Eigen::VectorXd wick_polynomial_pointwise(const WickContext& ctx, const WickPolynomial& poly,
                                          const Eigen::Ref<const Eigen::VectorXd>& v);

/// Gradient of z -> :P(z):(h) in field coefficients, i.e. the projections
/// of h :P'(z): onto each mode.
Eigen::VectorXd wick_potential_gradient(const WickContext& ctx, const WickPolynomial& poly,
                                        const Eigen::Ref<const Eigen::VectorXd>& z,
                                        const Eigen::Ref<const Eigen::VectorXd>& window);

/// Indicator of the whole domain on the grid.
Eigen::VectorXd unit_window(const SpectralBasis& basis);

}  // namespace sqlab
