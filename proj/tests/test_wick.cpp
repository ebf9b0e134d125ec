#include "doctest.h"
#include "oracles.hpp"

#include "sqlab/measures.hpp"
#include "sqlab/quadrature.hpp"
#include "sqlab/wick.hpp"

#include <cmath>

using namespace sqlab;

namespace {

BasisPtr neumann_interval(int m, double length = 2.0) {
  return build_basis(DomainSpec::interval(length), BoundaryCondition::NeumannAll, 1, m);
}
BasisPtr neumann_square(int m) {
  return build_basis(DomainSpec::rectangle(2, 2), BoundaryCondition::NeumannAll, 1, m);
}

WickContext free_context(const BasisPtr& basis) {
  return WickContext(basis, basis->eigenvalues().cwiseInverse());
}

Eigen::VectorXd random_coeffs(int n, Rng& rng, double scale = 1) {
  std::normal_distribution<double> g(0, scale);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

}  // namespace

TEST_CASE("hermite values") {
  CHECK(hermite(2, 1.0) == 0);
  CHECK(hermite(3, 2.0) == 2);
  CHECK(hermite(0, 3.7) == 1);
  CHECK(hermite(1, 3.7) == 3.7);
}

TEST_CASE("recurrence agrees with the coefficient formula") {
  for (int n = 0; n <= 12; ++n) {
    for (int t = -4; t <= 4; ++t)
      CHECK(hermite<long double>(n, t) == oracle::hermite_formula(n, t));
    for (long double t : {-1.3L, 0.25L, 2.7L}) {
      const long double ref = oracle::hermite_formula(n, t);
      CHECK(std::abs(hermite<long double>(n, t) - ref) <= 1e-14L * std::max(1.0L, std::abs(ref)));
    }
  }
}

TEST_CASE("hermite orthogonality under gauss-hermite quadrature") {
  auto [x, w] = gauss_hermite<long double>(24);
  for (int n = 0; n <= 8; ++n)
    for (int m = 0; m <= 8; ++m) {
      long double s = 0;
      for (int i = 0; i < x.size(); ++i) s += w[i] * hermite(n, x[i]) * hermite(m, x[i]);
      const long double exact = oracle::hermite_inner_exact(n, m);
      long double fact = 1;
      for (int k = 2; k <= n; ++k) fact *= k;
      CHECK(exact == (n == m ? fact : 0.0L));
      CHECK(std::abs(static_cast<double>(s - exact)) < 1e-10);
    }
  // Independent integral of one entry.
  const double h44 = oracle::standard_normal([](double t) { return std::pow(hermite(4, t), 2); });
  CHECK(h44 == doctest::Approx(24).epsilon(1e-10));
}

TEST_CASE("pointwise wick powers") {
  // One constant mode on (0, 1) with unit variance gives c = 1.
  auto basis = build_basis(DomainSpec::interval(1.0), BoundaryCondition::NeumannAll, 1, 1);
  WickContext ctx(basis, Eigen::VectorXd::Ones(1));
  CHECK((ctx.local_variance().array() - 1).abs().maxCoeff() < 1e-14);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(basis->grid_size());
  CHECK(wick_power_pointwise(ctx, ones, 2).cwiseAbs().maxCoeff() < 1e-15);

  auto wide = neumann_interval(6);
  auto wctx = free_context(wide);
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(wide->grid_size(), -2, 3);
  const Eigen::VectorXd cubed = wick_power_pointwise(wctx, v, 3);
  const Eigen::VectorXd expected =
      (v.array().cube() - 3 * wctx.local_variance().array() * v.array()).matrix();
  CHECK((cubed - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((wctx.local_variance().array() > 0).all());
  CHECK((wctx.recompute_local_variance() - wctx.local_variance()).cwiseAbs().maxCoeff() < 1e-12);

  // c -> 0 recovers plain powers.
  WickContext tiny(basis, Eigen::VectorXd::Constant(1, 1e-12));
  Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(basis->grid_size(), -2, 2);
  for (int n = 1; n <= 4; ++n) {
    const Eigen::VectorXd w = wick_power_pointwise(tiny, u, n);
    for (int i = 0; i < u.size(); ++i)
      CHECK(std::abs(w[i] - std::pow(u[i], n)) <= 1e-6 * std::max(std::abs(std::pow(u[i], n)), 1e-6) + 1e-11);
  }
}

TEST_CASE("paired wick powers") {
  auto basis = neumann_square(3);
  auto ctx = free_context(basis);
  Rng rng(11);
  const Eigen::VectorXd z = random_coeffs(basis->size(), rng);
  const Eigen::VectorXd window = unit_window(*basis);
  CHECK(wick_power_paired(ctx, z, 0, window) == doctest::Approx(4.0).epsilon(1e-13));
  const Eigen::VectorXd e1 = basis->grid_values().col(1);
  CHECK(wick_power_paired(ctx, z, 1, e1) == doctest::Approx(z[1]).epsilon(1e-12));
}

TEST_CASE("second moment of the wick square against tensor quadrature") {
  // Four modes on the square: the pairing with the unit window is a function
  // of four independent Gaussian coordinates.
  auto basis = neumann_square(2);
  REQUIRE(basis->size() == 4);
  auto ctx = free_context(basis);
  const Eigen::VectorXd window = unit_window(*basis);
  const Eigen::VectorXd sd = ctx.covariance().cwiseSqrt();

  auto [x, w] = gauss_hermite<double>(6);
  double moment = 0;
  Eigen::VectorXd z(4);
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b)
      for (int c = 0; c < 6; ++c)
        for (int d = 0; d < 6; ++d) {
          z << sd[0] * x[a], sd[1] * x[b], sd[2] * x[c], sd[3] * x[d];
          const double v = wick_power_paired(ctx, z, 2, window);
          moment += w[a] * w[b] * w[c] * w[d] * v * v;
        }
  // For the unit window, :z^2:(1) = sum z_n^2 - sum c_n, whose variance is 2 sum c_n^2.
  const double closed = 2 * ctx.covariance().squaredNorm();
  CHECK(moment == doctest::Approx(closed).epsilon(1e-10));

  GaussianMeasure mu = GaussianMeasure::free_field(basis);
  Rng rng(5);
  const Estimate mc = expectation(mu, [&](const Eigen::VectorXd& s) {
    const double v = wick_power_paired(ctx, s, 2, window);
    return v * v;
  }, 100000, rng);
  CHECK(std::abs(mc.value - moment) < 3 * mc.std_error);
}

TEST_CASE("translation identity") {
  Rng rng(21);
  for (auto basis : {neumann_interval(8), neumann_square(8)}) {
    auto ctx = free_context(basis);
    const Eigen::VectorXd window = unit_window(*basis);
    const Eigen::VectorXd z = random_coeffs(basis->size(), rng, 0.5);
    const Eigen::VectorXd k = random_coeffs(basis->size(), rng, 0.5);

    const auto zero = wick_translate_check(ctx, z, Eigen::VectorXd::Zero(basis->size()), 4, window);
    CHECK(zero.lhs == zero.rhs);
    CHECK(wick_translate_check(ctx, z, k, 1, window).abs_error < 1e-12);
    for (int n = 0; n <= 4; ++n) {
      const auto r = wick_translate_check(ctx, z, k, n, window);
      CHECK(r.abs_error < 1e-10);
    }
    // A non-trivial window.
    const Eigen::VectorXd bump = basis->grid_points().col(0).array().sin().square().matrix();
    CHECK(wick_translate_check(ctx, z, k, 4, bump).abs_error < 1e-10);
  }
}

TEST_CASE("polynomials") {
  WickPolynomial quad{{0, 0, 1}};
  auto basis = neumann_interval(5);
  auto ctx = free_context(basis);
  Rng rng(2);
  const Eigen::VectorXd z = random_coeffs(5, rng);
  const Eigen::VectorXd window = unit_window(*basis);
  CHECK(wick_polynomial_pair(ctx, quad, z, window) == doctest::Approx(wick_power_paired(ctx, z, 2, window)));

  const auto drift = wick_drift_polynomial(WickPolynomial::monomial(4, 0.1));
  REQUIRE(drift.coefficients.size() == 4);
  CHECK(drift.coefficients[3] == doctest::Approx(0.4));
  CHECK(drift.coefficients[0] == 0);

  CHECK(WickPolynomial::monomial(4, 0.1).is_admissible_potential());
  CHECK_FALSE(WickPolynomial::monomial(3, 0.1).is_admissible_potential());
  CHECK_FALSE(WickPolynomial::monomial(4, -0.1).is_admissible_potential());
  CHECK_FALSE(WickPolynomial{}.is_admissible_potential());
  CHECK_THROWS_AS(WickPolynomial::monomial(3, 1).validate_potential(), std::invalid_argument);
}

TEST_CASE("quartic energy against a symbolic expansion") {
  const double a = 0.1, length = 2.0;
  auto basis = build_basis(DomainSpec::interval(length), BoundaryCondition::NeumannAll, 1, 4, 48);
  auto ctx = free_context(basis);
  const Eigen::VectorXd cov = ctx.covariance();
  const oracle::QuarticEnergy symbolic(a, length, {cov.data(), cov.data() + cov.size()});

  Rng rng(9);
  const auto poly = WickPolynomial::monomial(4, a);
  const Eigen::VectorXd window = unit_window(*basis);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd z = random_coeffs(4, rng);
    CHECK(wick_polynomial_pair(ctx, poly, z, window) == doctest::Approx(symbolic(z)).epsilon(1e-11));
  }
}

TEST_CASE("potential gradient matches finite differences") {
  auto basis = neumann_square(3);
  auto ctx = free_context(basis);
  const auto poly = WickPolynomial{{0.3, 0, -0.2, 0, 0.1}};
  Rng rng(4);
  const Eigen::VectorXd z = random_coeffs(basis->size(), rng, 0.5);
  const Eigen::VectorXd window = unit_window(*basis);
  const Eigen::VectorXd grad = wick_potential_gradient(ctx, poly, z, window);
  const double s = 1e-5;
  for (int n = 0; n < basis->size(); ++n) {
    Eigen::VectorXd up = z, down = z;
    up[n] += s;
    down[n] -= s;
    const double fd = (wick_polynomial_pair(ctx, poly, up, window) - wick_polynomial_pair(ctx, poly, down, window)) / (2 * s);
    CHECK(grad[n] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("centering and orthogonality under the free field") {
  auto basis = neumann_square(3);
  auto ctx = free_context(basis);
  GaussianMeasure mu = GaussianMeasure::free_field(basis);
  const Eigen::VectorXd h = (1 + basis->grid_points().col(0).array()).matrix();
  const Eigen::VectorXd g = basis->grid_points().col(1).array().cos().matrix();

  std::vector<FieldFunction> fs;
  for (int n = 1; n <= 4; ++n)
    fs.push_back([&, n](const Eigen::VectorXd& z) { return wick_power_paired(ctx, z, n, h); });
  fs.push_back([&](const Eigen::VectorXd& z) {
    return wick_power_paired(ctx, z, 2, h) * wick_power_paired(ctx, z, 3, g);
  });
  const Eigen::Index probe = basis->grid_size() / 3;
  fs.push_back([&](const Eigen::VectorXd& z) {
    return wick_power_pointwise(ctx, basis->synthesize(z), 2)[probe];
  });
  Rng rng(13);
  const auto est = expectations(mu, fs, 100000, rng);
  for (const auto& e : est) CHECK(std::abs(e.value) < 3 * e.std_error);
}

TEST_CASE("context validation") {
  auto basis = neumann_interval(3);
  CHECK_THROWS(WickContext(basis, Eigen::VectorXd::Ones(2)));
  CHECK_THROWS(WickContext(basis, Eigen::Vector3d(1, 0, 1)));
  auto ctx = free_context(basis);
  CHECK_THROWS(wick_power_pointwise(ctx, Eigen::VectorXd::Ones(3), 2));
}
