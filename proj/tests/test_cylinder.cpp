#include "doctest.h"
#include "oracles.hpp"

#include "sqlab/cylinder.hpp"
#include "sqlab/errors.hpp"

#include <cmath>

using namespace sqlab;
using oracle::pi;

namespace {

BasisPtr dirichlet(int m) {
  return build_basis(DomainSpec::interval(), BoundaryCondition::DirichletAll, 0, m);
}

Eigen::VectorXd random_vector(int n, Rng& rng, double scale = 1) {
  std::normal_distribution<double> g(0, scale);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

Eigen::VectorXd unit(int size, int n) { return Eigen::VectorXd::Unit(size, n); }

}  // namespace

TEST_CASE("outer function derivatives") {
  const auto f = OuterFunction::parse("(* (sin x0) (exp (* -0.5 x1)))");
  CHECK(f.arity() == 2);
  const Jet j = f.evaluate(Eigen::Vector2d(0.3, 0.8));
  CHECK(j.value == doctest::Approx(std::sin(0.3) * std::exp(-0.4)));
  CHECK(j.gradient[0] == doctest::Approx(std::cos(0.3) * std::exp(-0.4)));
  CHECK(j.gradient[1] == doctest::Approx(-0.5 * std::sin(0.3) * std::exp(-0.4)));
  CHECK(j.hessian(0, 1) == doctest::Approx(-0.5 * std::cos(0.3) * std::exp(-0.4)));
  CHECK(j.hessian(1, 1) == doctest::Approx(0.25 * std::sin(0.3) * std::exp(-0.4)));

  Rng rng(3);
  const auto g = OuterFunction::parse("(+ (pow (- x0 x2) 3) (cos (* x1 x2)) 1.5)");
  Eigen::MatrixXd probes(3, 6);
  for (int c = 0; c < 6; ++c) probes.col(c) = random_vector(3, rng);
  CHECK(g.finite_difference_discrepancy(probes) < 1e-6);
  CHECK(f.finite_difference_discrepancy(probes.topRows(2)) < 1e-6);

  CHECK(OuterFunction::parse("x0", 3).arity() == 3);
  CHECK_THROWS_AS(OuterFunction::parse("(sin x0"), ConfigError);
  CHECK_THROWS_AS(OuterFunction::parse("(tan x0)"), ConfigError);
  CHECK_THROWS_AS(OuterFunction::parse("(pow x0 1.5)"), ConfigError);
  CHECK_THROWS_AS(OuterFunction::parse("x3", 2), ConfigError);
  CHECK_THROWS_AS(f.evaluate(Eigen::VectorXd::Ones(3)), DimensionMismatch);
}

TEST_CASE("cylinder function gradients") {
  Rng rng(4);
  const Eigen::VectorXd k = random_vector(6, rng);
  const Eigen::VectorXd z = random_vector(6, rng);
  const CylinderFunction linear(k, OuterFunction::parse("x0"));
  CHECK((linear.gradient_H(z) - k).norm() == 0);
  const CylinderFunction square(k, OuterFunction::parse("(pow x0 2)"));
  CHECK((square.gradient_H(z) - 2 * k.dot(z) * k).cwiseAbs().maxCoeff() < 1e-12);

  Eigen::MatrixXd dirs(6, 2);
  dirs << k, random_vector(6, rng);
  const CylinderFunction u(dirs, OuterFunction::parse("(* (sin x0) (exp (* -0.5 (pow x1 2))))"));
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd h = random_vector(6, rng);
    const double s = 1e-5;
    const double fd = (u.eval(z + s * h) - u.eval(z - s * h)) / (2 * s);
    const double d = u.directional(z, h);
    CHECK(d == doctest::Approx(fd).epsilon(1e-6));
    CHECK(std::abs(d - u.gradient_H(z).dot(h)) < 1e-10);
  }
  CHECK_THROWS_AS(u.eval(Eigen::VectorXd::Ones(5)), DimensionMismatch);
  CHECK_THROWS(CylinderFunction(dirs, OuterFunction::parse("x0")));
}

TEST_CASE("ou generator on simple functions") {
  auto basis = dirichlet(6);
  const auto gen = GeneratorSpec::ou_linear(basis);
  Rng rng(5);
  const Eigen::VectorXd z = random_vector(6, rng);
  const double lam = basis->eigenvalue(0);
  CHECK(apply_generator(gen, CylinderFunction(unit(6, 0), OuterFunction::parse("x0")), z) ==
        doctest::Approx(-lam * z[0]));
  CHECK(apply_generator(gen, CylinderFunction(unit(6, 0), OuterFunction::parse("(pow x0 2)")), z) ==
        doctest::Approx(1 - 2 * lam * z[0] * z[0]));
  CHECK_THROWS(GeneratorSpec::ou_linear(basis, 0.3).validate());
}

TEST_CASE("evaluation at an offset state") {
  auto basis = dirichlet(8);
  const auto gen = GeneratorSpec::ou_linear(basis);
  Rng rng(6);
  Eigen::MatrixXd dirs(8, 2);
  dirs << random_vector(8, rng), random_vector(8, rng);
  const CylinderFunction u(dirs, OuterFunction::parse("(* (sin x0) (cos x1))"));
  const Eigen::VectorXd z = random_vector(8, rng), f = random_vector(8, rng);
  GeneratorEvaluator plain(gen, u), offset(gen, u);
  const Eigen::MatrixXd images = drift_images(gen, u);
  offset.with_offset(dirs.transpose() * f, images.transpose() * f);
  CHECK(offset(z) == doctest::Approx(plain(z + f)).epsilon(1e-12));
  CHECK_THROWS_AS(plain.with_offset(Eigen::VectorXd::Ones(3), Eigen::VectorXd::Ones(2)), DimensionMismatch);
}

TEST_CASE("dirichlet energy") {
  auto basis = dirichlet(6);
  const auto mu1 = GaussianMeasure::ou_invariant(basis);
  Rng rng(7);
  const Eigen::VectorXd k = random_vector(6, rng);
  const CylinderFunction u(k, OuterFunction::parse("x0"));
  const auto e = dirichlet_energy(u, u, mu1, 1000, rng);
  CHECK(e.value == doctest::Approx(0.5 * k.squaredNorm()).epsilon(1e-14));
  CHECK(e.std_error == 0);

  const CylinderFunction a(unit(6, 0), OuterFunction::parse("x0"));
  const CylinderFunction b(unit(6, 3), OuterFunction::parse("x0"));
  CHECK(dirichlet_energy(a, b, mu1, 1000, rng).value == 0);

  const CylinderFunction s(unit(6, 0), OuterFunction::parse("(sin x0)"));
  const double c = mu1.covariance()[0];
  const double ref = 0.5 * oracle::standard_normal([c](double t) { return std::pow(std::cos(std::sqrt(c) * t), 2); });
  const auto es = dirichlet_energy(s, s, mu1, 100000, rng);
  CHECK(std::abs(es.value - ref) < 3 * es.std_error);
}

TEST_CASE("generator and form duality for symmetric pairs") {
  Rng rng(8);
  auto basis = build_basis(DomainSpec::interval(2.0), BoundaryCondition::NeumannAll, 1, 6);
  Eigen::MatrixXd du(6, 2), dv(6, 1);
  du << random_vector(6, rng, 0.6), random_vector(6, rng, 0.6);
  dv << random_vector(6, rng, 0.6);
  const CylinderFunction u(du, OuterFunction::parse("(* (sin x0) (cos x1))"));
  const CylinderFunction v(dv, OuterFunction::parse("(exp (* -0.5 (pow x0 2)))"));
  for (const auto& mu : {GaussianMeasure::free_field(basis), GaussianMeasure::ou_invariant(basis)}) {
    const auto gen = GeneratorSpec::symmetric_pair(mu);
    const GeneratorEvaluator lu(gen, u);
    const auto lhs = expectation(mu, [&](const Eigen::VectorXd& z) { return -lu(z) * v.eval(z); }, 200000, rng);
    const auto rhs = dirichlet_energy(u, v, mu, 200000, rng);
    CHECK(std::abs(lhs.value - rhs.value) < 3 * std::hypot(lhs.std_error, rhs.std_error));
  }
  const GaussianMeasure other(basis, Eigen::VectorXd::Zero(6), Eigen::VectorXd::Ones(6));
  CHECK_THROWS_AS(GeneratorSpec::symmetric_pair(other), UnsupportedConfiguration);
}

TEST_CASE("invariance and symmetry residuals") {
  auto basis = dirichlet(12);
  const auto mu1 = GaussianMeasure::ou_invariant(basis);
  const auto gen = GeneratorSpec::ou_linear(basis);
  Rng rng(9);
  Eigen::MatrixXd dirs(12, 2);
  dirs << random_vector(12, rng, 0.1), random_vector(12, rng, 0.1);
  const CylinderFunction u(dirs, OuterFunction::parse("(* (sin x0) (cos x1))"));
  const CylinderFunction v(dirs.col(0), OuterFunction::parse("(cos x0)"));
  const auto r = invariance_residual(gen, mu1, u, 200000, rng);
  CHECK(std::abs(r.value) < 3 * r.std_error);
  const auto s = symmetry_residual(gen, mu1, u, v, 200000, rng);
  CHECK(std::abs(s.value) < 3 * s.std_error);

  // Shifted measure with eigenmode directions: the drift sees the mean.
  Eigen::VectorXd shift(12);
  for (int n = 0; n < 12; ++n) shift[n] = std::sqrt(2.0) * (1 - std::pow(-1.0, n + 1)) / ((n + 1) * pi);
  const auto shifted = mu1.with_mean(shift);
  const CylinderFunction a(unit(12, 0), OuterFunction::parse("x0"));
  const CylinderFunction b(unit(12, 2), OuterFunction::parse("x0"));
  const auto bad = symmetry_residual(gen, shifted, a, b, 100000, rng);
  const double expected = shift[0] * shift[2] * (basis->eigenvalue(2) - basis->eigenvalue(0));
  CHECK(std::abs(bad.value - expected) < 3 * bad.std_error);
  CHECK(std::abs(bad.value) > 10 * bad.std_error);
}

TEST_CASE("gibbs generator leaves its measure infinitesimally invariant") {
  auto basis = build_basis(DomainSpec::interval(2.0), BoundaryCondition::NeumannAll, 1, 6);
  const GibbsMeasure gibbs(GaussianMeasure::free_field(basis), WickPolynomial::monomial(4, 0.1));
  const auto gen = GeneratorSpec::gibbs_drift(gibbs);
  Rng rng(10);
  Eigen::MatrixXd dirs(6, 2);
  dirs << random_vector(6, rng, 0.5), random_vector(6, rng, 0.5);
  const GeneratorEvaluator lu(gen, CylinderFunction(dirs, OuterFunction::parse("(* (sin x0) (cos x1))")));
  const auto r = invariance_residual(lu, gibbs, 100000, rng);
  CHECK(std::abs(r.value) < 3 * r.std_error);
  CHECK_THROWS(GeneratorEvaluator(gen, lu.function(), Eigen::MatrixXd::Zero(6, 2)));
}

TEST_CASE("direction functions") {
  auto basis = dirichlet(16);
  const auto bump = DirectionFunction::smooth_bump(0.4, 0.2, 2.0);
  CHECK(bump.is_interior(1.0));
  CHECK(bump.value(0.15) == 0);
  CHECK(bump.value(0.4) == doctest::Approx(2 * std::exp(-1.0)));
  const Eigen::VectorXd coeffs = expand(bump, *basis);
  for (int n : {0, 3, 9}) {
    const double ref = oracle::integrate([&](double x) { return bump.value(x) * oracle::dirichlet_mode(n, x); }, 0.2, 0.6);
    CHECK(coeffs[n] == doctest::Approx(ref).epsilon(1e-10));
  }
  // Interior support: the image of -d^2/dx^2 is diagonal in the eigenbasis.
  const Eigen::VectorXd image = expand_image(bump, *basis);
  CHECK((image - apply_operator_power(*basis, coeffs, 1)).cwiseAbs().maxCoeff() < 1e-8);

  // Second derivative by finite differences.
  for (double x : {0.28, 0.4, 0.51}) {
    const double h = 1e-4;
    const double fd = (bump.value(x + h) - 2 * bump.value(x) + bump.value(x - h)) / (h * h);
    CHECK(bump.second_derivative(x) == doctest::Approx(fd).epsilon(1e-5));
  }
  const auto c2 = DirectionFunction::c2_bump(0.25, 0.75);
  CHECK(c2.value(0.5) == doctest::Approx(1.0));
  for (double x : {0.3, 0.5, 0.7}) {
    const double h = 1e-4;
    const double fd = (c2.value(x + h) - 2 * c2.value(x) + c2.value(x - h)) / (h * h);
    CHECK(c2.second_derivative(x) == doctest::Approx(fd).epsilon(1e-5));
  }
  const double ip = oracle::integrate([&](double x) { return bump.value(x) * c2.value(x); }, 0.25, 0.6);
  CHECK(l2_inner(bump, c2) == doctest::Approx(ip).epsilon(1e-10));
  CHECK(l2_inner(bump, DirectionFunction::c2_bump(0.7, 0.9)) == 0);

  const auto mode = DirectionFunction::eigenmode(basis, 0);
  CHECK_FALSE(mode.is_interior(1.0));
  CHECK(mode.scaled(0.5).value(0.5) == doctest::Approx(0.5 * std::sqrt(2.0)));
}
