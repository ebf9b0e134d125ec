#include "sqlab/counterexamples.hpp"

#include "sqlab/dynamics.hpp"
#include "sqlab/errors.hpp"
#include "sqlab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sqlab {

CylinderFunction SuiteEntry::in_basis(const SpectralBasis& basis) const {
  Eigen::MatrixXd dirs(basis.size(), static_cast<Eigen::Index>(directions.size()));
  for (std::size_t j = 0; j < directions.size(); ++j) dirs.col(static_cast<Eigen::Index>(j)) = expand(directions[j], basis);
  return CylinderFunction(std::move(dirs), outer);
}

Eigen::MatrixXd SuiteEntry::images_in(const SpectralBasis& basis) const {
  Eigen::MatrixXd images(basis.size(), static_cast<Eigen::Index>(directions.size()));
  for (std::size_t j = 0; j < directions.size(); ++j)
    images.col(static_cast<Eigen::Index>(j)) = expand_image(directions[j], basis);
  return images;
}

Eigen::MatrixXd SuiteEntry::gram() const {
  const auto n = static_cast<Eigen::Index>(directions.size());
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) g(i, j) = g(j, i) = l2_inner(directions[i], directions[j]);
  return g;
}

DirectionFunction with_gradient_energy(const DirectionFunction& k, double target) {
  // For compactly supported k, the integral of k'^2 equals that of -k k''.
  auto [nodes, weights] = gauss_legendre(256, k.support_lo, k.support_hi);
  double energy = 0;
  for (Eigen::Index i = 0; i < nodes.size(); ++i)
    energy -= weights[i] * k.value(nodes[i]) * k.second_derivative(nodes[i]);
  if (!(energy > 0)) throw std::invalid_argument("with_gradient_energy: direction has no gradient energy");
  return k.scaled(std::sqrt(target / energy));
}

std::vector<SuiteEntry> interior_suite() {
  auto bump = [](double c, double w) {
    return with_gradient_energy(DirectionFunction::smooth_bump(c, w), 0.5);
  };
  std::vector<SuiteEntry> suite;
  suite.push_back({"sin", {bump(0.3, 0.15)}, OuterFunction::parse("(sin x0)")});
  suite.push_back({"cos", {bump(0.5, 0.2)}, OuterFunction::parse("(cos x0)")});
  suite.push_back({"gauss", {bump(0.65, 0.2)}, OuterFunction::parse("(exp (* -0.5 (pow x0 2)))")});
  suite.push_back({"sin*cos", {bump(0.3, 0.15), bump(0.7, 0.15)},
                   OuterFunction::parse("(* (sin x0) (cos x1))")});
  suite.push_back({"sin(sum)", {bump(0.4, 0.2), bump(0.6, 0.25)},
                   OuterFunction::parse("(sin (+ x0 x1))")});
  return suite;
}

std::vector<SuiteEntry> c2_suite() {
  const OuterFunction f = OuterFunction::parse("(sin x0)");
  return {{"c2[1/4,3/4]", {DirectionFunction::c2_bump(0.25, 0.75)}, f},
          {"c2[0.3,0.6]", {DirectionFunction::c2_bump(0.3, 0.6)}, f},
          {"c2[0.4,0.75]", {DirectionFunction::c2_bump(0.4, 0.75)}, f}};
}

FirstExampleBundle FirstExampleBundle::build(int truncation, int aux_truncation) {
  if (aux_truncation <= 0) aux_truncation = 2 * truncation;
  auto dirichlet = build_basis(DomainSpec::interval(1.0), BoundaryCondition::DirichletAll, 0.0, truncation);
  auto mixed = build_basis(DomainSpec::interval(1.0), BoundaryCondition::DirichletAtZeroNeumannAtOne, 0.0,
                           aux_truncation);
  return FirstExampleBundle{dirichlet,
                            mixed,
                            cross_overlap(*dirichlet, *mixed),
                            GaussianMeasure::ou_invariant(dirichlet),
                            GaussianMeasure::ou_invariant(mixed),
                            GeneratorSpec::ou_linear(dirichlet)};
}

double FirstExampleBundle::inverse_mixed_form(const Eigen::VectorXd& v) const {
  if (v.size() != dirichlet->size()) throw DimensionMismatch("inverse_mixed_form: length mismatch");
  const Eigen::VectorXd w = overlap.transpose() * v;
  const double norm = v.squaredNorm();
  if (norm - w.squaredNorm() > 1e-3 * norm)
    throw RefinementError("mixed truncation " + std::to_string(mixed->size()) +
                          " misses more than 1e-3 of |y|^2; increase it");
  return (w.array().square() / mixed->eigenvalues().array()).sum();
}

SecondExampleBundle SecondExampleBundle::build(int truncation) {
  auto dirichlet = build_basis(DomainSpec::interval(1.0), BoundaryCondition::DirichletAll, 0.0, truncation);
  Eigen::VectorXd shift(truncation);
  for (int n = 0; n < truncation; ++n) {
    const int freq = n + 1;
    shift[n] = freq % 2 == 1 ? 2.0 * std::numbers::sqrt2 / (freq * std::numbers::pi) : 0.0;
  }
  GaussianMeasure measure = GaussianMeasure::ou_invariant(dirichlet).with_mean(shift);
  return SecondExampleBundle{dirichlet, shift, measure, GeneratorSpec::ou_linear(dirichlet)};
}

double phase_defect(const SecondExampleBundle& bundle, const Eigen::VectorXd& y, double t) {
  const OUTransition k = ou_transition_kernel(*bundle.dirichlet, t, 1.0);
  return y.dot((k.decay.array() - 1.0).matrix().cwiseProduct(bundle.shift));
}

namespace {

Eigen::VectorXd mode_vector(int size, int mode, double scale) {
  if (mode < 0 || mode >= size) throw IndexOutOfRange("y mode " + std::to_string(mode) + " outside basis");
  Eigen::VectorXd y = Eigen::VectorXd::Zero(size);
  y[mode] = scale;
  return y;
}

void validate(const ExampleOptions& o) {
  if (o.truncation < 1) throw std::invalid_argument("truncation must be positive");
  if (!(o.time >= 0)) throw std::invalid_argument("time must be nonnegative");
  if (o.mc_samples < 2) throw std::invalid_argument("need at least two Monte-Carlo samples");
}

struct ComplexEstimate {
  std::complex<double> value;
  double std_error = 0;
  double projected = 0;
  double projected_stderr = 0;
};

// Averages an exp(i * phase(z)) * damping functional over `measure`, together
// with the projection of (value - reference) on the unit direction `dir`.
ComplexEstimate average_exponential(const GaussianMeasure& measure,
                                    std::function<double(const Eigen::VectorXd&)> phase,
                                    double damping, std::complex<double> reference,
                                    std::complex<double> dir, std::size_t n, Rng& rng) {
  const std::vector<FieldFunction> fns{
      [=](const Eigen::VectorXd& z) { return damping * std::cos(phase(z)); },
      [=](const Eigen::VectorXd& z) { return damping * std::sin(phase(z)); },
      [=](const Eigen::VectorXd& z) {
        return std::real((std::polar(damping, phase(z)) - reference) * std::conj(dir));
      }};
  const auto est = expectations(measure, fns, n, rng);
  return {{est[0].value, est[1].value},
          std::max(est[0].std_error, est[1].std_error),
          est[2].value,
          est[2].std_error};
}

std::complex<double> unit_direction(std::complex<double> d) {
  return std::abs(d) > 0 ? d / std::abs(d) : std::complex<double>(1.0, 0.0);
}

// <k_j, 1> and <-k_j'', 1> by quadrature on the supports.
std::pair<Eigen::VectorXd, Eigen::VectorXd> pairings_with_one(const SuiteEntry& entry) {
  const auto n = static_cast<Eigen::Index>(entry.directions.size());
  Eigen::VectorXd args(n), images(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& k = entry.directions[static_cast<std::size_t>(j)];
    auto [nodes, weights] = gauss_legendre(512, k.support_lo, k.support_hi);
    args[j] = images[j] = 0;
    for (Eigen::Index i = 0; i < nodes.size(); ++i) {
      args[j] += weights[i] * k.value(nodes[i]);
      images[j] -= weights[i] * k.second_derivative(nodes[i]);
    }
  }
  return {args, images};
}

ResidualRecord residual(const std::string& measure_label, const SuiteEntry& entry,
                        const GeneratorEvaluator& lu, const GaussianMeasure& measure, std::size_t n,
                        Rng& rng, bool control = false) {
  const Estimate e = invariance_residual(lu, measure, n, rng);
  return {measure_label, entry.label, e.value, e.std_error, control};
}

}  // namespace

ExampleReport run_first_example(const ExampleOptions& options, Rng& rng) {
  validate(options);
  const FirstExampleBundle b = FirstExampleBundle::build(options.truncation);
  ExampleReport r;
  r.example = "counterexample-1";
  r.options = options;

  if (options.residuals) {
    for (const auto& entry : interior_suite()) {
      const GeneratorEvaluator l1(b.generator, entry.in_basis(*b.dirichlet));
      r.residuals.push_back(residual("mu1", entry, l1, b.mu1, options.residual_samples, rng));
      // A1 acting on functions expanded in the mixed basis.
      const GeneratorEvaluator l2(GeneratorSpec::ou_linear(b.mixed), entry.in_basis(*b.mixed),
                                  entry.images_in(*b.mixed));
      r.residuals.push_back(residual("mu2", entry, l2, b.mu2, options.residual_samples, rng));
    }
  }

  const Eigen::VectorXd y = mode_vector(b.dirichlet->size(), options.y_mode, options.y_scale);
  const OUTransition k = ou_transition_kernel(*b.dirichlet, options.time, 1.0);
  const Eigen::VectorXd moved = k.decay.cwiseProduct(y);
  const double transition_damping = std::exp(-0.5 * (k.variance.array() * y.array().square()).sum());

  r.analytic_lhs = std::exp(-0.25 * b.inverse_mixed_form(y));
  r.analytic_rhs = std::exp(-0.25 * b.inverse_mixed_form(moved)) * transition_damping;
  r.gap = std::abs(r.analytic_lhs - r.analytic_rhs);

  const Eigen::VectorXd paired = b.overlap.transpose() * moved;
  const ComplexEstimate mc = average_exponential(
      b.mu2, [paired](const Eigen::VectorXd& w) { return paired.dot(w); }, transition_damping,
      r.analytic_lhs, unit_direction(r.analytic_rhs - r.analytic_lhs), options.mc_samples, rng);
  r.mc_estimate = mc.value;
  r.mc_stderr = mc.std_error;
  r.mc_gap = mc.projected;
  r.mc_gap_stderr = mc.projected_stderr;

  // Control: mu1 is invariant, so both sides coincide.
  const Eigen::VectorXd& c1 = b.mu1.covariance();
  r.control_lhs = std::exp(-0.5 * (c1.array() * y.array().square()).sum());
  r.control_rhs = std::exp(-0.5 * (c1.array() * moved.array().square()).sum()) * transition_damping;
  r.control_gap = std::abs(r.control_lhs - r.control_rhs);
  const ComplexEstimate control = average_exponential(
      b.mu1, [moved](const Eigen::VectorXd& z) { return moved.dot(z); }, transition_damping,
      r.control_lhs, 1.0, options.mc_samples, rng);
  r.control_mc_estimate = control.value;
  r.control_mc_stderr = control.std_error;
  return r;
}

ExampleReport run_second_example(const ExampleOptions& options, Rng& rng) {
  validate(options);
  const SecondExampleBundle b = SecondExampleBundle::build(options.truncation);
  ExampleReport r;
  r.example = "counterexample-2";
  r.options = options;

  if (options.residuals) {
    // The mean is the constant function 1, paired with k and A k exactly;
    // only the centred fluctuation is sampled.
    const GaussianMeasure centred = GaussianMeasure::ou_invariant(b.dirichlet);
    auto evaluate = [&](const SuiteEntry& entry, bool control) {
      GeneratorEvaluator lu(b.generator, entry.in_basis(*b.dirichlet), entry.images_in(*b.dirichlet));
      auto [args, images] = pairings_with_one(entry);
      lu.with_offset(args, images);
      r.residuals.push_back(residual("mu", entry, lu, centred, options.residual_samples, rng, control));
    };
    for (const auto& entry : interior_suite()) evaluate(entry, false);
    // The eigenmode is not supported away from the boundary: <A k, 1> != 0.
    evaluate({"eigenmode(0)", {DirectionFunction::eigenmode(b.dirichlet, 0).scaled(0.5)},
              OuterFunction::parse("(sin x0)")},
             true);
  }

  const Eigen::VectorXd y = mode_vector(b.dirichlet->size(), options.y_mode, options.y_scale);
  r.phase_defect = phase_defect(b, y, options.time);
  r.phase_limit = -y.dot(b.shift);

  const OUTransition k = ou_transition_kernel(*b.dirichlet, options.time, 1.0);
  const Eigen::VectorXd moved = k.decay.cwiseProduct(y);
  const double transition_damping = std::exp(-0.5 * (k.variance.array() * y.array().square()).sum());
  r.analytic_lhs = characteristic_functional(b.measure, y);
  r.analytic_rhs = characteristic_functional(b.measure, moved) * transition_damping;
  r.gap = std::abs(r.analytic_rhs - r.analytic_lhs);

  const ComplexEstimate mc = average_exponential(
      b.measure, [moved](const Eigen::VectorXd& z) { return moved.dot(z); }, transition_damping,
      r.analytic_lhs, unit_direction(r.analytic_rhs - r.analytic_lhs), options.mc_samples, rng);
  r.mc_estimate = mc.value;
  r.mc_stderr = mc.std_error;
  r.mc_gap = mc.projected;
  r.mc_gap_stderr = mc.projected_stderr;
  return r;
}

bool AgreementReport::decreasing() const {
  for (std::size_t i = 1; i < levels.size(); ++i)
    if (!(levels[i].discrepancy < levels[i - 1].discrepancy)) return false;
  return !levels.empty();
}

std::vector<std::function<double(double)>> random_probes(int count, Rng& rng) {
  std::normal_distribution<double> normal;
  std::vector<std::function<double(double)>> probes;
  while (static_cast<int>(probes.size()) < count) {
    const double a0 = normal(rng), a1 = normal(rng), a2 = normal(rng), a3 = normal(rng);
    auto z = [=](double x) { return a0 + a1 * x + a2 * std::cos(3.0 * x) + a3 * std::sin(5.0 * x); };
    if (std::abs(z(1.0)) >= 0.5) probes.push_back(z);
  }
  return probes;
}

namespace {

Eigen::VectorXd expand_probe(const std::function<double(double)>& z, const SpectralBasis& basis) {
  DirectionFunction f;
  f.value = z;
  f.second_derivative = [](double) { return 0.0; };
  f.support_lo = 0;
  f.support_hi = basis.domain().extents[0];
  return expand(f, basis);
}

}  // namespace

AgreementReport generator_agreement_check(const std::vector<int>& truncations,
                                          const std::vector<SuiteEntry>& suite,
                                          const std::vector<std::function<double(double)>>& probes) {
  const auto unit = DomainSpec::interval(1.0);
  const SuiteEntry control{"eigenmode(0)",
                           {DirectionFunction::eigenmode(build_basis(unit, BoundaryCondition::DirichletAll, 0.0, 1), 0)},
                           OuterFunction::parse("(sin x0)")};
  AgreementReport report;
  for (int m : truncations) {
    const auto b1 = build_basis(unit, BoundaryCondition::DirichletAll, 0.0, m);
    const auto b2 = build_basis(unit, BoundaryCondition::DirichletAtZeroNeumannAtOne, 0.0, m);
    const auto g1 = GeneratorSpec::ou_linear(b1);
    const auto g2 = GeneratorSpec::ou_linear(b2);
    std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> states;
    for (const auto& p : probes) states.emplace_back(expand_probe(p, *b1), expand_probe(p, *b2));

    auto discrepancy = [&](const SuiteEntry& entry, bool at_zero) {
      const Eigen::MatrixXd gram = entry.gram();
      GeneratorEvaluator l1(g1, entry.in_basis(*b1));
      GeneratorEvaluator l2(g2, entry.in_basis(*b2));
      l1.with_gram(gram);
      l2.with_gram(gram);
      if (at_zero) return std::abs(l1(Eigen::VectorXd::Zero(m)) - l2(Eigen::VectorXd::Zero(m)));
      double worst = 0;
      for (const auto& [z1, z2] : states) worst = std::max(worst, std::abs(l1(z1) - l2(z2)));
      return worst;
    };

    AgreementLevel level;
    level.truncation = m;
    for (const auto& entry : suite) {
      level.discrepancy = std::max(level.discrepancy, discrepancy(entry, false));
      level.zero_state_discrepancy = std::max(level.zero_state_discrepancy, discrepancy(entry, true));
    }
    level.control_discrepancy = discrepancy(control, false);
    report.levels.push_back(level);
  }
  return report;
}

}  // namespace sqlab
