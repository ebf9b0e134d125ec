#include "sqlab/spectral.hpp"

#include "sqlab/errors.hpp"
#include "sqlab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace sqlab {

namespace {
constexpr double kPi = std::numbers::pi;
}

DomainSpec DomainSpec::interval(double length) {
  if (!(length > 0)) throw std::invalid_argument("interval length must be positive");
  return DomainSpec{1, {length, 1.0}};
}

DomainSpec DomainSpec::rectangle(double a, double b) {
  if (!(a > 0) || !(b > 0)) throw std::invalid_argument("rectangle extents must be positive");
  return DomainSpec{2, {a, b}};
}

double DomainSpec::volume() const {
  return dimension == 1 ? extents[0] : extents[0] * extents[1];
}

std::string to_string(BoundaryCondition bc) {
  switch (bc) {
    case BoundaryCondition::NeumannAll: return "neumann";
    case BoundaryCondition::DirichletAll: return "dirichlet";
    case BoundaryCondition::DirichletAtZeroNeumannAtOne: return "dirichlet-neumann";
  }
  return "unknown";
}

BoundaryCondition boundary_condition_from_string(const std::string& name) {
  if (name == "neumann") return BoundaryCondition::NeumannAll;
  if (name == "dirichlet") return BoundaryCondition::DirichletAll;
  if (name == "dirichlet-neumann" || name == "mixed")
    return BoundaryCondition::DirichletAtZeroNeumannAtOne;
  throw std::invalid_argument("unknown boundary condition '" + name + "'");
}

double SpectralBasis::factor_value(BoundaryCondition bc, int n, double x, double length) {
  const double norm = std::sqrt(2.0 / length);
  switch (bc) {
    case BoundaryCondition::DirichletAll:
      return norm * std::sin((n + 1) * kPi * x / length);
    case BoundaryCondition::DirichletAtZeroNeumannAtOne:
      return norm * std::sin((n + 0.5) * kPi * x / length);
    case BoundaryCondition::NeumannAll:
      return n == 0 ? 1.0 / std::sqrt(length) : norm * std::cos(n * kPi * x / length);
  }
  return 0.0;
}

double SpectralBasis::factor_eigenvalue(BoundaryCondition bc, int n, double length) {
  double k = 0;
  switch (bc) {
    case BoundaryCondition::DirichletAll: k = (n + 1) * kPi / length; break;
    case BoundaryCondition::DirichletAtZeroNeumannAtOne: k = (n + 0.5) * kPi / length; break;
    case BoundaryCondition::NeumannAll: k = n * kPi / length; break;
  }
  return k * k;
}

SpectralBasis::SpectralBasis(DomainSpec domain, BoundaryCondition bc, double mass_shift,
                             int truncation, int quadrature_order)
    : domain_(domain), bc_(bc), mass_shift_(mass_shift), truncation_(truncation) {
  if (domain_.dimension != 1 && domain_.dimension != 2)
    throw UnsupportedConfiguration("dimension must be 1 or 2");
  if (!(domain_.extents[0] > 0) || (domain_.dimension == 2 && !(domain_.extents[1] > 0)))
    throw std::invalid_argument("domain extents must be positive");
  if (bc_ == BoundaryCondition::DirichletAtZeroNeumannAtOne && domain_.dimension != 1)
    throw UnsupportedConfiguration("mixed Dirichlet/Neumann condition is only supported in 1D");
  if (truncation_ < 1) throw std::invalid_argument("truncation must be >= 1");
  if (!(mass_shift_ >= 0)) throw std::invalid_argument("mass_shift must be >= 0");

  quadrature_order_ = quadrature_order > 0 ? quadrature_order
                                           : std::max(4 * truncation_, 2 * truncation_ + 16);

  const int dim = domain_.dimension;
  if (dim == 1) {
    modes_.reserve(truncation_);
    for (int n = 0; n < truncation_; ++n) modes_.push_back({n, 0});
  } else {
    std::vector<std::array<int, 2>> box;
    for (int n1 = 0; n1 < truncation_; ++n1)
      for (int n2 = 0; n2 < truncation_; ++n2) box.push_back({n1, n2});
    auto lambda_of = [&](const std::array<int, 2>& m) {
      return factor_eigenvalue(bc_, m[0], domain_.extents[0]) +
             factor_eigenvalue(bc_, m[1], domain_.extents[1]);
    };
    std::stable_sort(box.begin(), box.end(), [&](const auto& l, const auto& r) {
      const double ll = lambda_of(l), lr = lambda_of(r);
      if (ll != lr) return ll < lr;
      return l < r;
    });
    modes_ = std::move(box);
  }

  eigenvalues_.resize(static_cast<Eigen::Index>(modes_.size()));
  for (std::size_t i = 0; i < modes_.size(); ++i) {
    // Same summation order as the sort key, so ties stay exact.
    double curvature = factor_eigenvalue(bc_, modes_[i][0], domain_.extents[0]);
    if (dim == 2) curvature += factor_eigenvalue(bc_, modes_[i][1], domain_.extents[1]);
    eigenvalues_[static_cast<Eigen::Index>(i)] = mass_shift_ + curvature;
  }

  std::array<Eigen::VectorXd, 2> axis_nodes;
  for (int axis = 0; axis < dim; ++axis) {
    auto [nodes, weights] = gauss_legendre(quadrature_order_, 0.0, domain_.extents[axis]);
    axis_nodes[axis] = nodes;
    axis_weights_[axis] = weights;
    Eigen::MatrixXd vals(quadrature_order_, truncation_);
    for (int i = 0; i < quadrature_order_; ++i)
      for (int n = 0; n < truncation_; ++n)
        vals(i, n) = factor_value(bc_, n, nodes[i], domain_.extents[axis]);
    axis_values_[axis] = vals;
  }
  if (dim == 1) {
    points_ = axis_nodes[0];
    weights_ = axis_weights_[0];
  } else {
    const int q = quadrature_order_;
    points_.resize(q * q, 2);
    weights_.resize(q * q);
    for (int i2 = 0; i2 < q; ++i2)
      for (int i1 = 0; i1 < q; ++i1) {
        points_(i1 + q * i2, 0) = axis_nodes[0][i1];
        points_(i1 + q * i2, 1) = axis_nodes[1][i2];
        weights_[i1 + q * i2] = axis_weights_[0][i1] * axis_weights_[1][i2];
      }
  }
  values_ = evaluate_on(points_);
}

double SpectralBasis::eigenvalue(int n) const {
  if (n < 0 || n >= size()) throw IndexOutOfRange("mode index " + std::to_string(n) + " out of range");
  return eigenvalues_[n];
}

const std::array<int, 2>& SpectralBasis::mode_index(int n) const {
  if (n < 0 || n >= size()) throw IndexOutOfRange("mode index " + std::to_string(n) + " out of range");
  return modes_[static_cast<std::size_t>(n)];
}

double SpectralBasis::eval(int n, const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const auto& m = mode_index(n);
  if (x.size() != dimension()) throw DimensionMismatch("point dimension does not match basis");
  double v = factor_value(bc_, m[0], x[0], domain_.extents[0]);
  if (dimension() == 2) v *= factor_value(bc_, m[1], x[1], domain_.extents[1]);
  return v;
}

Eigen::MatrixXd SpectralBasis::evaluate_on(const Eigen::Ref<const Eigen::MatrixXd>& points) const {
  if (points.cols() != dimension()) throw DimensionMismatch("point dimension does not match basis");
  Eigen::MatrixXd out(points.rows(), size());
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    for (int n = 0; n < size(); ++n) {
      const auto& m = modes_[static_cast<std::size_t>(n)];
      double v = factor_value(bc_, m[0], points(i, 0), domain_.extents[0]);
      if (dimension() == 2) v *= factor_value(bc_, m[1], points(i, 1), domain_.extents[1]);
      out(i, n) = v;
    }
  return out;
}

Eigen::VectorXd SpectralBasis::synthesize(const Eigen::Ref<const Eigen::VectorXd>& coeffs) const {
  if (coeffs.size() != size()) throw DimensionMismatch("coefficient vector length does not match basis");
  if (dimension() == 1) return values_ * coeffs;
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(truncation_, truncation_);
  for (int n = 0; n < size(); ++n) c(modes_[n][0], modes_[n][1]) = coeffs[n];
  const Eigen::MatrixXd grid = axis_values_[0] * c * axis_values_[1].transpose();
  return Eigen::Map<const Eigen::VectorXd>(grid.data(), grid.size());
}

Eigen::VectorXd SpectralBasis::analyze(const Eigen::Ref<const Eigen::VectorXd>& grid_values) const {
  if (grid_values.size() != grid_size()) throw DimensionMismatch("grid function does not match basis quadrature");
  if (dimension() == 1) return values_.transpose() * grid_values.cwiseProduct(weights_);
  const Eigen::MatrixXd weighted =
      Eigen::Map<const Eigen::MatrixXd>(grid_values.data(), quadrature_order_, quadrature_order_)
          .cwiseProduct(Eigen::Map<const Eigen::MatrixXd>(weights_.data(), quadrature_order_,
                                                          quadrature_order_));
  const Eigen::MatrixXd c = axis_values_[0].transpose() * weighted * axis_values_[1];
  Eigen::VectorXd out(size());
  for (int n = 0; n < size(); ++n) out[n] = c(modes_[n][0], modes_[n][1]);
  return out;
}

BasisPtr build_basis(const DomainSpec& domain, BoundaryCondition bc, double mass_shift,
                     int truncation, int quadrature_order) {
  return std::make_shared<const SpectralBasis>(domain, bc, mass_shift, truncation, quadrature_order);
}

double eval_eigenfunction(const SpectralBasis& basis, int n,
                          const Eigen::Ref<const Eigen::VectorXd>& x) {
  return basis.eval(n, x);
}

namespace {
void require_length(const SpectralBasis& basis, Eigen::Index len) {
  if (len != basis.size()) throw DimensionMismatch("coefficient vector length does not match basis");
}

Eigen::ArrayXd eigenvalue_powers(const SpectralBasis& basis, double alpha) {
  const auto& lambda = basis.eigenvalues();
  if (alpha < 0 && (lambda.array() <= 0).any())
    throw SingularPower("negative operator power on a basis with a zero eigenvalue");
  return lambda.array().pow(alpha);
}
}  // namespace

double sobolev_inner(const SpectralBasis& basis, const Eigen::Ref<const Eigen::VectorXd>& u,
                     const Eigen::Ref<const Eigen::VectorXd>& v, double alpha) {
  require_length(basis, u.size());
  require_length(basis, v.size());
  return (eigenvalue_powers(basis, alpha) * u.array() * v.array()).sum();
}

Eigen::VectorXd apply_operator_power(const SpectralBasis& basis,
                                     const Eigen::Ref<const Eigen::VectorXd>& coeffs,
                                     double alpha) {
  require_length(basis, coeffs.size());
  return (eigenvalue_powers(basis, alpha) * coeffs.array()).matrix();
}

Eigen::MatrixXd cross_overlap(const SpectralBasis& a, const SpectralBasis& b) {
  if (!a.same_domain(b)) throw DimensionMismatch("cross_overlap: bases live on different domains");
  const int order = std::max({a.quadrature_order(), b.quadrature_order(),
                              2 * (a.truncation() + b.truncation()) + 8});
  if (a.dimension() == 1) {
    auto [nodes, weights] = gauss_legendre(order, 0.0, a.domain().extents[0]);
    const Eigen::MatrixXd va = a.evaluate_on(nodes);
    const Eigen::MatrixXd vb = b.evaluate_on(nodes);
    return va.transpose() * weights.asDiagonal() * vb;
  }
  auto [n0, w0] = gauss_legendre(order, 0.0, a.domain().extents[0]);
  auto [n1, w1] = gauss_legendre(order, 0.0, a.domain().extents[1]);
  Eigen::MatrixXd pts(order * order, 2);
  Eigen::VectorXd w(order * order);
  for (int j = 0; j < order; ++j)
    for (int i = 0; i < order; ++i) {
      pts(i + order * j, 0) = n0[i];
      pts(i + order * j, 1) = n1[j];
      w[i + order * j] = w0[i] * w1[j];
    }
  return a.evaluate_on(pts).transpose() * w.asDiagonal() * b.evaluate_on(pts);
}

}  // namespace sqlab
