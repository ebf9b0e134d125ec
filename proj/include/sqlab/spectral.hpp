#pragma once

#include <Eigen/Dense>

#include <array>
#include <memory>
#include <string>
#include <vector>

namespace sqlab {

/// Open interval (0, L) or open rectangle (0, a) x (0, b).
struct DomainSpec {
  int dimension = 1;
  std::array<double, 2> extents{1.0, 1.0};

  static DomainSpec interval(double length = 1.0);
  static DomainSpec rectangle(double a, double b);

  double volume() const;
  bool operator==(const DomainSpec&) const = default;
};

enum class BoundaryCondition { NeumannAll, DirichletAll, DirichletAtZeroNeumannAtOne };

std::string to_string(BoundaryCondition bc);
BoundaryCondition boundary_condition_from_string(const std::string& name);

/// Truncated eigenbasis of (-Laplacian + mass_shift) with closed-form
/// trigonometric eigenfunctions, together with a tensor Gauss-Legendre grid.
///
/// Modes are indexed from 0 and sorted by ascending eigenvalue; in 2D the
/// retained modes form the index box n1, n2 < truncation with ties broken
/// lexicographically. Immutable after construction.
class SpectralBasis {
 public:
  SpectralBasis(DomainSpec domain, BoundaryCondition bc, double mass_shift, int truncation,
                int quadrature_order = 0);

  const DomainSpec& domain() const { return domain_; }
  BoundaryCondition boundary_condition() const { return bc_; }
  double mass_shift() const { return mass_shift_; }
  int truncation() const { return truncation_; }
  int quadrature_order() const { return quadrature_order_; }
  int dimension() const { return domain_.dimension; }

  /// Number of retained modes (truncation or truncation^2).
  int size() const { return static_cast<int>(eigenvalues_.size()); }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  double eigenvalue(int n) const;
  /// Per-dimension frequency indices of mode n.
  const std::array<int, 2>& mode_index(int n) const;

  /// Value of the n-th orthonormal eigenfunction at x (x has `dimension()` entries).
  double eval(int n, const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// Matrix with entry (i, n) = e_n(points.row(i)).
  Eigen::MatrixXd evaluate_on(const Eigen::Ref<const Eigen::MatrixXd>& points) const;

  // Quadrature grid. Points are ordered with the first coordinate fastest.
  int grid_size() const { return static_cast<int>(weights_.size()); }
  const Eigen::MatrixXd& grid_points() const { return points_; }
  const Eigen::VectorXd& grid_weights() const { return weights_; }
  /// grid_size() x size() matrix of eigenfunction values on the grid.
  const Eigen::MatrixXd& grid_values() const { return values_; }

  /// Grid values of sum_n coeffs_n e_n.
  Eigen::VectorXd synthesize(const Eigen::Ref<const Eigen::VectorXd>& coeffs) const;
  /// Quadrature projections <f, e_n> of grid values f.
  Eigen::VectorXd analyze(const Eigen::Ref<const Eigen::VectorXd>& grid_values) const;
  /// Quadrature integral of a grid function.
  double integrate(const Eigen::Ref<const Eigen::VectorXd>& grid_values) const {
    return weights_.dot(grid_values);
  }

  bool same_domain(const SpectralBasis& other) const { return domain_ == other.domain_; }

 private:
  static double factor_value(BoundaryCondition bc, int n, double x, double length);
  static double factor_eigenvalue(BoundaryCondition bc, int n, double length);

  DomainSpec domain_;
  BoundaryCondition bc_;
  double mass_shift_;
  int truncation_;
  int quadrature_order_;
  Eigen::VectorXd eigenvalues_;
  std::vector<std::array<int, 2>> modes_;

  Eigen::MatrixXd points_;
  Eigen::VectorXd weights_;
  Eigen::MatrixXd values_;
  // 2D separable factors: quadrature nodes per axis x frequency index.
  std::array<Eigen::MatrixXd, 2> axis_values_;
  std::array<Eigen::VectorXd, 2> axis_weights_;
};

using BasisPtr = std::shared_ptr<const SpectralBasis>;

BasisPtr build_basis(const DomainSpec& domain, BoundaryCondition bc, double mass_shift,
                     int truncation, int quadrature_order = 0);

double eval_eigenfunction(const SpectralBasis& basis, int n,
                          const Eigen::Ref<const Eigen::VectorXd>& x);

/// sum_n lambda_n^alpha u_n v_n
double sobolev_inner(const SpectralBasis& basis, const Eigen::Ref<const Eigen::VectorXd>& u,
                     const Eigen::Ref<const Eigen::VectorXd>& v, double alpha);

/// Coefficient-wise multiplication by lambda_n^alpha.
Eigen::VectorXd apply_operator_power(const SpectralBasis& basis,
                                     const Eigen::Ref<const Eigen::VectorXd>& coeffs,
                                     double alpha);

/// O(n, m) = integral of e_n^A e_m^B, computed on a grid fine enough for both.
Eigen::MatrixXd cross_overlap(const SpectralBasis& a, const SpectralBasis& b);

}  // namespace sqlab
