#include "sqlab/cylinder.hpp"

#include "sqlab/errors.hpp"
#include "sqlab/quadrature.hpp"

#include <algorithm>
#include <cmath>

namespace sqlab {

GeneratorSpec GeneratorSpec::ou_linear(BasisPtr basis, double trace_factor, double drift_factor) {
  GeneratorSpec gen;
  gen.basis = std::move(basis);
  gen.drift_kind = DriftKind::OuLinear;
  gen.trace_factor = trace_factor;
  gen.drift_factor = drift_factor;
  gen.validate();
  return gen;
}

GeneratorSpec GeneratorSpec::gibbs_drift(GibbsMeasure measure, double trace_factor,
                                         double drift_factor) {
  GeneratorSpec gen;
  gen.basis = measure.base().basis_ptr();
  gen.drift_kind = DriftKind::Gibbs;
  gen.trace_factor = trace_factor;
  gen.drift_factor = drift_factor;
  gen.gibbs.emplace(std::move(measure));
  gen.validate();
  return gen;
}

GeneratorSpec GeneratorSpec::symmetric_pair(const GaussianMeasure& measure) {
  const Eigen::ArrayXd product = measure.covariance().array() * measure.basis().eigenvalues().array();
  auto all_close = [&](double target) { return ((product - target).abs() < 1e-12 * target).all(); };
  if (all_close(1.0)) return ou_linear(measure.basis_ptr(), 0.5, 0.5);
  if (all_close(0.5)) return ou_linear(measure.basis_ptr(), 0.5, 1.0);
  throw UnsupportedConfiguration("symmetric_pair: covariance is neither A^{-1} nor (1/2) A^{-1}");
}

void GeneratorSpec::validate() const {
  auto allowed = [](double f) { return f == 0.5 || f == 1.0; };
  if (!basis) throw std::invalid_argument("GeneratorSpec: null basis");
  if (!allowed(trace_factor) || !allowed(drift_factor))
    throw std::invalid_argument("GeneratorSpec: trace and drift factors must be 1/2 or 1");
  if (drift_kind == DriftKind::Gibbs && !gibbs)
    throw std::invalid_argument("GeneratorSpec: Gibbs drift needs a Gibbs measure");
}

Eigen::MatrixXd drift_images(const GeneratorSpec& gen, const CylinderFunction& u) {
  if (u.directions.rows() != gen.basis->size())
    throw DimensionMismatch("drift_images: directions do not match generator basis");
  Eigen::MatrixXd images(u.directions.rows(), u.directions.cols());
  for (Eigen::Index j = 0; j < u.directions.cols(); ++j)
    images.col(j) = apply_operator_power(*gen.basis, u.directions.col(j), 1.0);
  return images;
}

GeneratorEvaluator::GeneratorEvaluator(const GeneratorSpec& gen, CylinderFunction u)
    : trace_factor_(gen.trace_factor), drift_factor_(gen.drift_factor), u_(std::move(u)) {
  gen.validate();
  gram_ = u_.directions.transpose() * u_.directions;
  if (gen.drift_kind == DriftKind::OuLinear) {
    images_ = drift_images(gen, u_);
  } else {
    for (Eigen::Index j = 0; j < u_.directions.cols(); ++j)
      log_derivatives_.push_back(log_derivative(*gen.gibbs, u_.directions.col(j)));
  }
}

GeneratorEvaluator::GeneratorEvaluator(const GeneratorSpec& gen, CylinderFunction u,
                                       Eigen::MatrixXd images)
    : trace_factor_(gen.trace_factor), drift_factor_(gen.drift_factor), u_(std::move(u)),
      images_(std::move(images)) {
  gen.validate();
  if (gen.drift_kind != DriftKind::OuLinear)
    throw std::invalid_argument("explicit drift images only apply to OU generators");
  if (images_.rows() != u_.directions.rows() || images_.cols() != u_.directions.cols())
    throw DimensionMismatch("drift images do not match directions");
  gram_ = u_.directions.transpose() * u_.directions;
}

GeneratorEvaluator& GeneratorEvaluator::with_gram(Eigen::MatrixXd gram) {
  if (gram.rows() != u_.arity() || gram.cols() != u_.arity())
    throw DimensionMismatch("Gram matrix does not match number of directions");
  gram_ = std::move(gram);
  return *this;
}

GeneratorEvaluator& GeneratorEvaluator::with_offset(Eigen::VectorXd arguments, Eigen::VectorXd pairings) {
  if (!log_derivatives_.empty()) throw std::invalid_argument("offsets only apply to OU generators");
  if (arguments.size() != u_.arity() || pairings.size() != u_.arity())
    throw DimensionMismatch("offsets do not match number of directions");
  argument_offset_ = std::move(arguments);
  pairing_offset_ = std::move(pairings);
  return *this;
}

double GeneratorEvaluator::operator()(const Eigen::VectorXd& z) const {
  Eigen::VectorXd args = u_.arguments(z);
  if (argument_offset_.size()) args += argument_offset_;
  const Jet jet = u_.outer.evaluate(args);
  const double trace = gram_.cwiseProduct(jet.hessian).sum();
  Eigen::VectorXd pairing(u_.arity());
  if (log_derivatives_.empty()) {
    pairing = -(images_.transpose() * z);
    if (pairing_offset_.size()) pairing -= pairing_offset_;
  } else {
    for (int j = 0; j < u_.arity(); ++j) pairing[j] = log_derivatives_[j](z);
  }
  return trace_factor_ * trace + drift_factor_ * pairing.dot(jet.gradient);
}

double apply_generator(const GeneratorSpec& gen, const CylinderFunction& u,
                       const Eigen::VectorXd& z) {
  return GeneratorEvaluator(gen, u)(z);
}

namespace {

template <class Measure>
Estimate energy_impl(const CylinderFunction& u, const CylinderFunction& v, const Measure& measure,
                     std::size_t n_samples, Rng& rng) {
  FieldFunction integrand = [&](const Eigen::VectorXd& z) {
    return 0.5 * u.gradient_H(z).dot(v.gradient_H(z));
  };
  return expectation(measure, integrand, n_samples, rng);
}

}  // namespace

Estimate dirichlet_energy(const CylinderFunction& u, const CylinderFunction& v,
                          const GaussianMeasure& measure, std::size_t n_samples, Rng& rng) {
  return energy_impl(u, v, measure, n_samples, rng);
}

Estimate dirichlet_energy(const CylinderFunction& u, const CylinderFunction& v,
                          const GibbsMeasure& measure, std::size_t n_samples, Rng& rng) {
  return energy_impl(u, v, measure, n_samples, rng);
}

Estimate invariance_residual(const GeneratorEvaluator& lu, const GaussianMeasure& measure,
                             std::size_t n_samples, Rng& rng) {
  return expectation(measure, FieldFunction(std::cref(lu)), n_samples, rng);
}

Estimate invariance_residual(const GeneratorEvaluator& lu, const GibbsMeasure& measure,
                             std::size_t n_samples, Rng& rng) {
  return expectation(measure, FieldFunction(std::cref(lu)), n_samples, rng);
}

Estimate invariance_residual(const GeneratorSpec& gen, const GaussianMeasure& measure,
                             const CylinderFunction& u, std::size_t n_samples, Rng& rng) {
  return invariance_residual(GeneratorEvaluator(gen, u), measure, n_samples, rng);
}

Estimate symmetry_residual(const GeneratorEvaluator& lu, const GeneratorEvaluator& lv,
                           const GaussianMeasure& measure, std::size_t n_samples, Rng& rng) {
  FieldFunction integrand = [&](const Eigen::VectorXd& z) {
    return lu(z) * lv.function().eval(z) - lu.function().eval(z) * lv(z);
  };
  return expectation(measure, integrand, n_samples, rng);
}

Estimate symmetry_residual(const GeneratorSpec& gen, const GaussianMeasure& measure,
                           const CylinderFunction& u, const CylinderFunction& v,
                           std::size_t n_samples, Rng& rng) {
  return symmetry_residual(GeneratorEvaluator(gen, u), GeneratorEvaluator(gen, v), measure,
                           n_samples, rng);
}

DirectionFunction DirectionFunction::smooth_bump(double center, double half_width, double amplitude) {
  if (!(half_width > 0)) throw std::invalid_argument("smooth_bump: half_width must be positive");
  DirectionFunction k;
  k.support_lo = center - half_width;
  k.support_hi = center + half_width;
  k.value = [=](double x) {
    const double r = (x - center) / half_width;
    if (std::abs(r) >= 1) return 0.0;
    return amplitude * std::exp(-1.0 / (1.0 - r * r));
  };
  k.second_derivative = [=](double x) {
    const double r = (x - center) / half_width;
    if (std::abs(r) >= 1) return 0.0;
    const double s = 1.0 - r * r;
    const double phi = std::exp(-1.0 / s);
    const double g1 = -2.0 * r / (s * s);
    const double g2 = -2.0 / (s * s) - 8.0 * r * r / (s * s * s);
    return amplitude * phi * (g1 * g1 + g2) / (half_width * half_width);
  };
  k.label = "smooth_bump(" + std::to_string(center) + "," + std::to_string(half_width) + ")";
  return k;
}

DirectionFunction DirectionFunction::c2_bump(double lo, double hi, double amplitude) {
  if (!(hi > lo)) throw std::invalid_argument("c2_bump: empty support");
  const double qmax = 0.25 * (hi - lo) * (hi - lo);
  const double scale = amplitude / (qmax * qmax * qmax);
  DirectionFunction k;
  k.support_lo = lo;
  k.support_hi = hi;
  k.value = [=](double x) {
    if (x <= lo || x >= hi) return 0.0;
    const double q = (x - lo) * (hi - x);
    return scale * q * q * q;
  };
  k.second_derivative = [=](double x) {
    if (x <= lo || x >= hi) return 0.0;
    const double q = (x - lo) * (hi - x);
    const double dq = hi + lo - 2.0 * x;
    return scale * (6.0 * q * dq * dq - 6.0 * q * q);
  };
  k.label = "c2_bump(" + std::to_string(lo) + "," + std::to_string(hi) + ")";
  return k;
}

DirectionFunction DirectionFunction::eigenmode(BasisPtr basis, int n) {
  if (basis->dimension() != 1) throw UnsupportedConfiguration("eigenmode directions are 1D only");
  const double curvature = basis->eigenvalue(n) - basis->mass_shift();
  DirectionFunction k;
  k.support_lo = 0;
  k.support_hi = basis->domain().extents[0];
  k.value = [basis, n](double x) {
    Eigen::VectorXd p(1);
    p[0] = x;
    return basis->eval(n, p);
  };
  k.second_derivative = [basis, n, curvature](double x) {
    Eigen::VectorXd p(1);
    p[0] = x;
    return -curvature * basis->eval(n, p);
  };
  k.label = "eigenmode(" + std::to_string(n) + ")";
  return k;
}

DirectionFunction DirectionFunction::scaled(double factor) const {
  DirectionFunction k = *this;
  k.value = [f = value, factor](double x) { return factor * f(x); };
  k.second_derivative = [f = second_derivative, factor](double x) { return factor * f(x); };
  return k;
}

namespace {

int default_order(const SpectralBasis& basis, int order) {
  return order > 0 ? order : std::max(256, 4 * basis.truncation() + 64);
}

Eigen::VectorXd project(const std::function<double(double)>& f, double lo, double hi,
                        const SpectralBasis& basis, int order) {
  if (basis.dimension() != 1) throw UnsupportedConfiguration("direction functions are 1D only");
  lo = std::max(lo, 0.0);
  hi = std::min(hi, basis.domain().extents[0]);
  auto [nodes, weights] = gauss_legendre(order, lo, hi);
  Eigen::VectorXd fv(order);
  for (int i = 0; i < order; ++i) fv[i] = f(nodes[i]);
  return basis.evaluate_on(nodes).transpose() * fv.cwiseProduct(weights);
}

}  // namespace

Eigen::VectorXd expand(const DirectionFunction& k, const SpectralBasis& basis, int order) {
  return project(k.value, k.support_lo, k.support_hi, basis, default_order(basis, order));
}

Eigen::VectorXd expand_image(const DirectionFunction& k, const SpectralBasis& basis, int order) {
  const double m = basis.mass_shift();
  auto image = [&](double x) { return -k.second_derivative(x) + m * k.value(x); };
  return project(image, k.support_lo, k.support_hi, basis, default_order(basis, order));
}

double l2_inner(const DirectionFunction& a, const DirectionFunction& b, int order) {
  const double lo = std::max(a.support_lo, b.support_lo);
  const double hi = std::min(a.support_hi, b.support_hi);
  if (!(hi > lo)) return 0.0;
  auto [nodes, weights] = gauss_legendre(order > 0 ? order : 256, lo, hi);
  double acc = 0;
  for (Eigen::Index i = 0; i < nodes.size(); ++i) acc += weights[i] * a.value(nodes[i]) * b.value(nodes[i]);
  return acc;
}

}  // namespace sqlab
