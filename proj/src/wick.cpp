#include "sqlab/wick.hpp"

#include "sqlab/errors.hpp"

#include <cmath>
#include <stdexcept>

namespace sqlab {

bool WickPolynomial::is_admissible_potential() const {
  const int d = degree();
  return d >= 2 && d % 2 == 0 && leading() > 0;
}

void WickPolynomial::validate_potential() const {
  if (!is_admissible_potential())
    throw std::invalid_argument("potential polynomial must have even degree >= 2 and positive leading coefficient");
}

WickPolynomial WickPolynomial::monomial(int degree, double coefficient) {
  WickPolynomial p;
  p.coefficients.assign(static_cast<std::size_t>(degree) + 1, 0.0);
  p.coefficients.back() = coefficient;
  return p;
}

WickPolynomial wick_drift_polynomial(const WickPolynomial& poly) {
  WickPolynomial out;
  for (int n = 1; n <= poly.degree(); ++n) out.coefficients.push_back(n * poly.coefficients[n]);
  return out;
}

WickContext::WickContext(BasisPtr basis, Eigen::VectorXd covariance)
    : basis_(std::move(basis)), covariance_(std::move(covariance)) {
  if (!basis_) throw std::invalid_argument("WickContext: null basis");
  if (covariance_.size() != basis_->size())
    throw DimensionMismatch("WickContext: covariance length does not match basis");
  if ((covariance_.array() <= 0).any())
    throw std::invalid_argument("WickContext: covariance must be positive");
  local_variance_ = recompute_local_variance();
}

Eigen::VectorXd WickContext::recompute_local_variance() const {
  return basis_->grid_values().array().square().matrix() * covariance_;
}

namespace {
void require_grid(const WickContext& ctx, Eigen::Index n) {
  if (n != ctx.basis().grid_size()) throw DimensionMismatch("grid function does not match Wick context");
}
}  // namespace

Eigen::VectorXd wick_power_pointwise(const WickContext& ctx,
                                     const Eigen::Ref<const Eigen::VectorXd>& v, int n) {
  require_grid(ctx, v.size());
  const auto& c = ctx.local_variance();
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = wick_monomial(n, v[i], c[i]);
  return out;
}

double wick_power_paired(const WickContext& ctx, const Eigen::Ref<const Eigen::VectorXd>& z,
                         int n, const Eigen::Ref<const Eigen::VectorXd>& window) {
  require_grid(ctx, window.size());
  const Eigen::VectorXd v = ctx.basis().synthesize(z);
  return ctx.basis().integrate(wick_power_pointwise(ctx, v, n).cwiseProduct(window));
}

TranslationCheck wick_translate_check(const WickContext& ctx,
                                      const Eigen::Ref<const Eigen::VectorXd>& z,
                                      const Eigen::Ref<const Eigen::VectorXd>& k, int n,
                                      const Eigen::Ref<const Eigen::VectorXd>& window) {
  TranslationCheck out;
  const Eigen::VectorXd shifted = z + k;
  out.lhs = wick_power_paired(ctx, shifted, n, window);
  const Eigen::VectorXd kg = ctx.basis().synthesize(k);
  double binom = 1.0;
  for (int m = n; m >= 0; --m) {
    // binom = C(n, m), updated from C(n, m+1)
    if (m < n) binom = binom * (m + 1) / (n - m);
    const Eigen::VectorXd h = kg.array().pow(n - m).matrix().cwiseProduct(window);
    out.rhs += binom * wick_power_paired(ctx, z, m, h);
  }
  out.abs_error = std::abs(out.lhs - out.rhs);
  return out;
}

Eigen::VectorXd wick_polynomial_pointwise(const WickContext& ctx, const WickPolynomial& poly,
                                          const Eigen::Ref<const Eigen::VectorXd>& v) {
  require_grid(ctx, v.size());
  const auto& c = ctx.local_variance();
  const auto& a = poly.coefficients;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(v.size());
  if (a.empty()) return out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    double prev = 1.0, cur = v[i];
    double acc = a[0];
    for (int k = 1; k <= poly.degree(); ++k) {
      acc += a[k] * cur;
      const double next = v[i] * cur - k * c[i] * prev;
      prev = cur;
      cur = next;
    }
    out[i] = acc;
  }
  return out;
}

double wick_polynomial_pair(const WickContext& ctx, const WickPolynomial& poly,
                            const Eigen::Ref<const Eigen::VectorXd>& z,
                            const Eigen::Ref<const Eigen::VectorXd>& window) {
  require_grid(ctx, window.size());
  const Eigen::VectorXd v = ctx.basis().synthesize(z);
  return ctx.basis().integrate(wick_polynomial_pointwise(ctx, poly, v).cwiseProduct(window));
}

Eigen::VectorXd wick_potential_gradient(const WickContext& ctx, const WickPolynomial& poly,
                                        const Eigen::Ref<const Eigen::VectorXd>& z,
                                        const Eigen::Ref<const Eigen::VectorXd>& window) {
  require_grid(ctx, window.size());
  const Eigen::VectorXd v = ctx.basis().synthesize(z);
  const Eigen::VectorXd drift = wick_polynomial_pointwise(ctx, wick_drift_polynomial(poly), v);
  return ctx.basis().analyze(drift.cwiseProduct(window));
}

Eigen::VectorXd unit_window(const SpectralBasis& basis) {
  return Eigen::VectorXd::Ones(basis.grid_size());
}

}  // namespace sqlab
