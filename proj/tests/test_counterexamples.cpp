#include "doctest.h"
#include "oracles.hpp"

#include "sqlab/counterexamples.hpp"
#include "sqlab/errors.hpp"

#include <cmath>

using namespace sqlab;
using oracle::pi;

namespace {

// For y = sqrt(2) sin(pi x): the mixed problem -u'' = y, u(0) = 0, u'(1) = 0 has
// u = y / pi^2 + sqrt(2) x / pi, so <A_mixed^{-1} y, y> = 3 / pi^2.
constexpr double mixed_form_of_first_mode = 3 / (pi * pi);

double first_example_lhs() { return std::exp(-0.25 * mixed_form_of_first_mode); }
double first_example_rhs(double t) {
  const double lam = pi * pi, e = std::exp(-2 * lam * t);
  return std::exp(-0.25 * e * mixed_form_of_first_mode - 0.5 * (1 - e) / (2 * lam));
}

}  // namespace

TEST_CASE("first example bundle") {
  const auto b = FirstExampleBundle::build(16);
  CHECK(b.mixed->size() == 32);
  CHECK((b.overlap.rowwise().norm().array() <= 1 + 1e-10).all());
  for (int n = 1; n < 16; ++n) CHECK(b.mu1.covariance()[n] < b.mu1.covariance()[n - 1]);
  for (int n = 1; n < 32; ++n) CHECK(b.mu2.covariance()[n] < b.mu2.covariance()[n - 1]);
  CHECK(b.inverse_mixed_form(Eigen::VectorXd::Unit(16, 0)) == doctest::Approx(mixed_form_of_first_mode).epsilon(1e-7));

  const auto small = FirstExampleBundle::build(64);
  const auto large = FirstExampleBundle::build(128);
  const Eigen::VectorXd y64 = Eigen::VectorXd::Unit(64, 0), y128 = Eigen::VectorXd::Unit(128, 0);
  CHECK(std::abs(small.inverse_mixed_form(y64) - large.inverse_mixed_form(y128)) < 1e-6);

  const auto starved = FirstExampleBundle::build(32, 2);
  CHECK_THROWS_AS(starved.inverse_mixed_form(Eigen::VectorXd::Unit(32, 20)), RefinementError);
}

TEST_CASE("second example shift") {
  const auto b = SecondExampleBundle::build(32);
  for (int n = 0; n < 32; ++n) {
    const int k = n + 1;
    CHECK(b.shift[n] == doctest::Approx(std::sqrt(2.0) * (1 - std::pow(-1.0, k)) / (k * pi)).epsilon(1e-12));
    if (k % 2 == 0) CHECK(b.shift[n] == 0);
  }
  CHECK((b.measure.mean() - b.shift).norm() == 0);
}

TEST_CASE("phase defect") {
  const auto b = SecondExampleBundle::build(32);
  const Eigen::VectorXd y0 = Eigen::VectorXd::Unit(32, 0), y1 = Eigen::VectorXd::Unit(32, 1);
  CHECK(phase_defect(b, y0, 0) == 0);
  for (double t : {0.0, 0.01, 0.1, 1.0, 100.0}) CHECK(phase_defect(b, y1, t) == 0);
  const double limit = oracle::integrate_ts([](double x) { return std::sqrt(2.0) * std::sin(pi * x); }, 0, 1);
  CHECK(limit == doctest::Approx(2 * std::sqrt(2.0) / pi).epsilon(1e-14));
  CHECK(std::abs(std::abs(phase_defect(b, y0, 50.0)) - limit) < 1e-6);
  CHECK(phase_defect(b, y0, 0.1) == doctest::Approx((std::exp(-pi * pi * 0.1) - 1) * limit).epsilon(1e-12));
}

TEST_CASE("first example closed form and controls") {
  ExampleOptions o;
  o.truncation = 16;
  o.mc_samples = 40000;
  o.residuals = false;
  Rng rng(1);
  const auto r = run_first_example(o, rng);
  CHECK(r.analytic_lhs.real() == doctest::Approx(first_example_lhs()).epsilon(1e-7));
  CHECK(r.analytic_rhs.real() == doctest::Approx(first_example_rhs(0.1)).epsilon(1e-7));
  CHECK(r.gap == doctest::Approx(first_example_rhs(0.1) - first_example_lhs()).epsilon(1e-5));
  CHECK(r.gap > 10 * r.mc_stderr);
  CHECK(std::abs(r.mc_estimate - r.analytic_rhs) < 3 * std::sqrt(2.0) * r.mc_stderr);
  CHECK(r.control_gap < 1e-14);

  o.time = 0;
  const auto at0 = run_first_example(o, rng);
  CHECK(at0.gap == 0);
}

TEST_CASE("second example gap") {
  ExampleOptions o;
  o.truncation = 32;
  o.time = 1.0;
  o.mc_samples = 40000;
  o.residuals = false;
  Rng rng(2);
  const auto r = run_second_example(o, rng);
  const double delta = (std::exp(-pi * pi) - 1) * 2 * std::sqrt(2.0) / pi;
  CHECK(r.phase_defect == doctest::Approx(delta).epsilon(1e-12));
  const double expected = std::exp(-1 / (4 * pi * pi)) * 2 * std::abs(std::sin(delta / 2));
  CHECK(r.gap == doctest::Approx(expected).epsilon(1e-10));
  CHECK(std::abs(r.mc_gap - r.gap) < 3 * r.mc_gap_stderr);

  o.y_mode = 1;
  CHECK(run_second_example(o, rng).gap < 1e-15);
  o.y_mode = 0;
  o.time = 0;
  CHECK(run_second_example(o, rng).gap == 0);
}

TEST_CASE("invariance residuals at reduced sample size") {
  ExampleOptions o;
  o.truncation = 32;
  o.residual_samples = 100000;
  o.mc_samples = 1000;
  Rng rng(3);
  for (const auto& r : {run_first_example(o, rng), run_second_example(o, rng)}) {
    for (const auto& rec : r.residuals) {
      if (rec.control)
        CHECK(rec.z_score() > 10);
      else
        CHECK(rec.z_score() < 3);
    }
  }
}

TEST_CASE("direction suites") {
  for (const auto& entry : interior_suite()) {
    CHECK(entry.directions.size() == static_cast<std::size_t>(entry.outer.arity()));
    for (const auto& k : entry.directions) {
      CHECK(k.is_interior(1.0));
      const double energy = oracle::integrate([&](double x) { return -k.value(x) * k.second_derivative(x); },
                                              k.support_lo, k.support_hi);
      CHECK(energy == doctest::Approx(0.5).epsilon(1e-8));
    }
    const Eigen::MatrixXd g = entry.gram();
    CHECK((g - g.transpose()).norm() == 0);
  }
  CHECK(interior_suite().size() >= 5);
  for (const auto& entry : c2_suite())
    for (const auto& k : entry.directions) CHECK((k.support_lo >= 0.25 && k.support_hi <= 0.75));
  const auto k = with_gradient_energy(DirectionFunction::c2_bump(0.3, 0.6), 2.0);
  CHECK(oracle::integrate([&](double x) { return -k.value(x) * k.second_derivative(x); }, 0.3, 0.6) ==
        doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("generator agreement") {
  Rng rng(4);
  const auto probes = random_probes(4, rng);
  for (const auto& p : probes) CHECK(std::abs(p(1.0)) >= 0.5);
  const auto report = generator_agreement_check({16, 32, 64}, c2_suite(), probes);
  REQUIRE(report.levels.size() == 3);
  CHECK(report.decreasing());
  for (const auto& level : report.levels) {
    CHECK(level.control_discrepancy > 1e-3);
    CHECK(level.zero_state_discrepancy < 1e-12);
  }
}
