#pragma once

#include "sqlab/cylinder.hpp"
#include "sqlab/cylinder_function.hpp"
#include "sqlab/measures.hpp"
#include "sqlab/spectral.hpp"

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <string>
#include <vector>

namespace sqlab {

/// Test function u = F(<k_1, .>, ..., <k_N, .>) with directions given as functions on (0, 1).
struct SuiteEntry {
  std::string label;
  std::vector<DirectionFunction> directions;
  OuterFunction outer;

  /// Cylinder function with directions expanded in `basis`.
  CylinderFunction in_basis(const SpectralBasis& basis) const;
  /// Columns <-k_j'' + m k_j, e_n>.
  Eigen::MatrixXd images_in(const SpectralBasis& basis) const;
  /// L^2 Gram matrix of the directions.
  Eigen::MatrixXd gram() const;
};

/// Rescales k so that the integral of k'^2 equals `target`.
DirectionFunction with_gradient_energy(const DirectionFunction& k, double target);

/// Five smooth interior bump pairs used by the invariance checks.
std::vector<SuiteEntry> interior_suite();
/// C^2 bumps supported in [1/4, 3/4] with u = sin(<k, .>).
std::vector<SuiteEntry> c2_suite();

struct ResidualRecord {
  std::string measure;
  std::string function;
  double value = 0;
  double std_error = 0;
  /// Expected to be nonzero (negative control).
  bool control = false;

  double z_score() const { return std_error > 0 ? std::abs(value) / std_error : (value == 0 ? 0.0 : INFINITY); }
};

/// Dirichlet operator on (0, 1) and the mixed operator (Dirichlet at 0,
/// Neumann at 1) with their OU invariant measures N(0, A_i^{-1} / 2).
struct FirstExampleBundle {
  BasisPtr dirichlet;
  BasisPtr mixed;
  /// overlap(n, m) = <e_n^dirichlet, e_m^mixed>
  Eigen::MatrixXd overlap;
  GaussianMeasure mu1;
  GaussianMeasure mu2;
  GeneratorSpec generator;

  /// The mixed basis gets `aux_truncation` modes (default 2 * truncation).
  static FirstExampleBundle build(int truncation, int aux_truncation = 0);

  /// <A_mixed^{-1} v, v> for v in Dirichlet coordinates. Throws RefinementError
  /// when the mixed truncation captures less than 1 - 1e-3 of |v|^2.
  double inverse_mixed_form(const Eigen::VectorXd& v) const;
};

/// Dirichlet operator on (0, 1) and N(1, A^{-1} / 2).
struct SecondExampleBundle {
  BasisPtr dirichlet;
  /// Coefficients of the constant function 1: sqrt(2) (1 - (-1)^n) / (n pi), n = 1, 2, ...
  Eigen::VectorXd shift;
  GaussianMeasure measure;
  GeneratorSpec generator;

  static SecondExampleBundle build(int truncation);
};

struct ExampleOptions {
  int truncation = 32;
  double time = 0.1;
  /// Zero-based Dirichlet mode carrying y.
  int y_mode = 0;
  double y_scale = 1.0;
  std::size_t mc_samples = 100000;
  std::size_t residual_samples = 1000000;
  bool residuals = true;
};

/// Gap between int f dmu and int p_t f dmu for f = exp(i <y, .>).
struct ExampleReport {
  std::string example;
  ExampleOptions options;
  std::complex<double> analytic_lhs;
  std::complex<double> analytic_rhs;
  double gap = 0;
  /// Monte-Carlo estimate of analytic_rhs and its (componentwise max) standard error.
  std::complex<double> mc_estimate;
  double mc_stderr = 0;
  /// Monte-Carlo estimate of the gap along the analytic gap direction.
  double mc_gap = 0;
  double mc_gap_stderr = 0;
  std::vector<ResidualRecord> residuals;

  // First example: the same comparison for the invariant measure mu1.
  std::complex<double> control_lhs;
  std::complex<double> control_rhs;
  double control_gap = 0;
  std::complex<double> control_mc_estimate;
  double control_mc_stderr = 0;

  // Second example: phase defect delta(t) and its t -> infinity limit.
  double phase_defect = 0;
  double phase_limit = 0;
};

ExampleReport run_first_example(const ExampleOptions& options, Rng& rng);
ExampleReport run_second_example(const ExampleOptions& options, Rng& rng);

/// <y, (e^{-tA} - 1) shift> for the second example.
double phase_defect(const SecondExampleBundle& bundle, const Eigen::VectorXd& y, double t);

struct AgreementLevel {
  int truncation = 0;
  /// max |L^{A1} u(z) - L^{A2} u(z)| over suite and probes.
  double discrepancy = 0;
  /// The same for an A1 eigenmode direction.
  double control_discrepancy = 0;
  /// The same at z = 0.
  double zero_state_discrepancy = 0;
};

struct AgreementReport {
  std::vector<AgreementLevel> levels;
  bool decreasing() const;
};

/// Random smooth probe states on (0, 1) with |z(1)| >= 0.5.
std::vector<std::function<double(double)>> random_probes(int count, Rng& rng);

AgreementReport generator_agreement_check(const std::vector<int>& truncations,
                                          const std::vector<SuiteEntry>& suite,
                                          const std::vector<std::function<double(double)>>& probes);

}  // namespace sqlab
