#pragma once

#include "sqlab/cylinder_function.hpp"
#include "sqlab/measures.hpp"
#include "sqlab/spectral.hpp"

#include <Eigen/Dense>

#include <functional>
#include <optional>

namespace sqlab {

enum class DriftKind { OuLinear, Gibbs };

/// Second-order operator acting on cylinder functions:
///   Lu = trace_factor * sum_{j,j'} <k_j, k_j'> d_jj' F + drift_factor * sum_j p_j(z) d_j F
/// with p_j(z) = -<A k_j, z> (OuLinear) or the Gibbs log-derivative beta_{k_j}(z).
struct GeneratorSpec {
  BasisPtr basis;
  DriftKind drift_kind = DriftKind::OuLinear;
  double trace_factor = 0.5;
  double drift_factor = 1.0;
  std::optional<GibbsMeasure> gibbs;

  /// Generator of dX = -drift_factor A X dt + dW (trace 1/2, drift 1 by default).
  static GeneratorSpec ou_linear(BasisPtr basis, double trace_factor = 0.5, double drift_factor = 1.0);
  /// Gradient-form generator of a Gibbs measure, 1/2 sum (d^2/dk^2 + beta_k d/dk).
  static GeneratorSpec gibbs_drift(GibbsMeasure measure, double trace_factor = 0.5,
                                   double drift_factor = 0.5);
  /// Gradient-form generator whose Dirichlet form is the one of `measure`.
  /// The covariance must be either A^{-1} or (1/2) A^{-1} of its basis.
  static GeneratorSpec symmetric_pair(const GaussianMeasure& measure);

  void validate() const;
};

/// Columns A k_j in the generator's basis.
Eigen::MatrixXd drift_images(const GeneratorSpec& gen, const CylinderFunction& u);

/// Evaluates Lu(z) for a fixed generator and cylinder function. For OU
/// generators the images A k_j may be supplied explicitly, which is how
/// boundary-blind directions are realized in a basis of another operator.
class GeneratorEvaluator {
 public:
  GeneratorEvaluator(const GeneratorSpec& gen, CylinderFunction u);
  GeneratorEvaluator(const GeneratorSpec& gen, CylinderFunction u, Eigen::MatrixXd images);

  /// Replaces the trace-term Gram matrix <k_j, k_j'>.
  GeneratorEvaluator& with_gram(Eigen::MatrixXd gram);
  /// Evaluates at z + f for a fixed function f known only through the
  /// pairings <k_j, f> and <A k_j, f> (OU generators only).
  GeneratorEvaluator& with_offset(Eigen::VectorXd arguments, Eigen::VectorXd pairings);

  double operator()(const Eigen::VectorXd& z) const;
  const CylinderFunction& function() const { return u_; }

 private:
  double trace_factor_;
  double drift_factor_;
  CylinderFunction u_;
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd images_;
  Eigen::VectorXd argument_offset_;
  Eigen::VectorXd pairing_offset_;
  std::vector<FieldFunction> log_derivatives_;
};

double apply_generator(const GeneratorSpec& gen, const CylinderFunction& u,
                       const Eigen::VectorXd& z);

/// (1/2) E[<grad u, grad v>]
Estimate dirichlet_energy(const CylinderFunction& u, const CylinderFunction& v,
                          const GaussianMeasure& measure, std::size_t n_samples, Rng& rng);
Estimate dirichlet_energy(const CylinderFunction& u, const CylinderFunction& v,
                          const GibbsMeasure& measure, std::size_t n_samples, Rng& rng);

/// E[Lu]
Estimate invariance_residual(const GeneratorEvaluator& lu, const GaussianMeasure& measure,
                             std::size_t n_samples, Rng& rng);
Estimate invariance_residual(const GeneratorEvaluator& lu, const GibbsMeasure& measure,
                             std::size_t n_samples, Rng& rng);
Estimate invariance_residual(const GeneratorSpec& gen, const GaussianMeasure& measure,
                             const CylinderFunction& u, std::size_t n_samples, Rng& rng);

/// E[Lu v - u Lv]
Estimate symmetry_residual(const GeneratorEvaluator& lu, const GeneratorEvaluator& lv,
                           const GaussianMeasure& measure, std::size_t n_samples, Rng& rng);
Estimate symmetry_residual(const GeneratorSpec& gen, const GaussianMeasure& measure,
                           const CylinderFunction& u, const CylinderFunction& v,
                           std::size_t n_samples, Rng& rng);

/// A direction k given as a function on a 1D interval, with its second
/// derivative and a closed support [support_lo, support_hi].
struct DirectionFunction {
  std::function<double(double)> value;
  std::function<double(double)> second_derivative;
  double support_lo = 0;
  double support_hi = 1;
  std::string label;

  /// C-infinity bump amplitude * exp(-1 / (1 - r^2)), r = (x - center) / half_width.
  static DirectionFunction smooth_bump(double center, double half_width, double amplitude = 1.0);
  /// C^2 bump amplitude * ((x-lo)(hi-x))^3 / max.
  static DirectionFunction c2_bump(double lo, double hi, double amplitude = 1.0);
  /// The n-th eigenfunction of a 1D basis (support = whole interval).
  static DirectionFunction eigenmode(BasisPtr basis, int n);

  DirectionFunction scaled(double factor) const;
  /// True when value and first two derivatives vanish near both endpoints of (0, length).
  bool is_interior(double length) const { return support_lo > 0 && support_hi < length; }
};

/// Coefficients <k, e_n> by Gauss-Legendre quadrature on the support.
Eigen::VectorXd expand(const DirectionFunction& k, const SpectralBasis& basis, int order = 0);
/// Coefficients <-k'' + m k, e_n>; equals A k for k vanishing to second order at the boundary.
Eigen::VectorXd expand_image(const DirectionFunction& k, const SpectralBasis& basis, int order = 0);
/// L^2 inner product of two direction functions.
double l2_inner(const DirectionFunction& a, const DirectionFunction& b, int order = 0);

}  // namespace sqlab
