#pragma once

// Reference computations for the test suites. Nothing here calls the
// numerical kernels under test.

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/sinh_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

inline constexpr double pi = std::numbers::pi;

/// Adaptive Gauss-Kronrod on [a, b].
inline double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-13) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, tol);
}

/// Tanh-sinh on [a, b]; tolerant of endpoint behaviour.
inline double integrate_ts(const std::function<double(double)>& f, double a, double b) {
  boost::math::quadrature::tanh_sinh<double> ts;
  return ts.integrate(f, a, b);
}

/// Integral over the real line.
inline double integrate_line(const std::function<double(double)>& f) {
  boost::math::quadrature::sinh_sinh<double> ss;
  return ss.integrate(f);
}

/// E[f(N(0, 1))].
inline double standard_normal(const std::function<double(double)>& f) {
  return integrate_line([&](double x) {
           const double g = std::exp(-0.5 * x * x);
           return g == 0 ? 0.0 : f(x) * g;
         }) /
         std::sqrt(2 * pi);
}

/// Number of eigenvalues of a symmetric tridiagonal matrix below x (Sturm count).
inline int sturm_count(const std::vector<double>& diag, const std::vector<double>& off, double x) {
  int count = 0;
  double q = diag[0] - x;
  if (q < 0) ++count;
  for (std::size_t i = 1; i < diag.size(); ++i) {
    if (q == 0) q = 1e-300;
    q = diag[i] - x - off[i - 1] * off[i - 1] / q;
    if (q < 0) ++count;
  }
  return count;
}

/// Lowest eigenvalue of the finite-difference -d^2/dx^2 on (0, 1) with n
/// unknowns: Dirichlet at both ends, or Dirichlet at 0 and Neumann at 1
/// (one-sided ghost node on a vertex grid with x_n = 1, symmetrized).
inline double fd_lowest(bool mixed, int n) {
  std::vector<double> diag(n), off(n - 1);
  if (!mixed) {
    const double h = 1.0 / (n + 1);
    for (auto& d : diag) d = 2 / (h * h);
    for (auto& o : off) o = -1 / (h * h);
  } else {
    // Nodes x_i = i h, i = 1..n, x_n = 1; the Neumann row (2u_n - 2u_{n-1})/h^2
    // is symmetrized by halving the last unknown's weight: D^{1/2} A D^{-1/2}.
    const double h = 1.0 / n;
    for (auto& d : diag) d = 2 / (h * h);
    for (auto& o : off) o = -1 / (h * h);
    off[n - 2] = -std::sqrt(2.0) / (h * h);
  }
  double lo = 0, hi = 4.0 * (n + 1) * (n + 1) + 10;
  for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (sturm_count(diag, off, mid) >= 1 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Probabilists' Hermite polynomial from the explicit coefficient formula
/// He_n(t) = sum_m (-1)^m n! / ((n-2m)! 2^m m!) t^{n-2m}.
inline long double hermite_formula(int n, long double t) {
  long double sum = 0;
  for (int m = 0; 2 * m <= n; ++m) {
    long double a = 1;
    for (int k = n - 2 * m + 1; k <= n; ++k) a *= k;  // n! / (n-2m)!
    for (int k = 1; k <= m; ++k) a /= 2.0L * k;        // / (2^m m!)
    sum += (m % 2 ? -a : a) * std::pow(t, n - 2 * m);
  }
  return sum;
}

/// E[He_n He_m] under N(0, 1) by exact moment arithmetic: coefficients of
/// He_n He_m paired with E[t^{2j}] = (2j - 1)!!.
inline long double hermite_inner_exact(int n, int m) {
  auto coeffs = [](int deg) {
    std::vector<long double> c(deg + 1, 0.0L);
    for (int k = 0; 2 * k <= deg; ++k) {
      long double a = 1;
      for (int i = deg - 2 * k + 1; i <= deg; ++i) a *= i;
      for (int i = 1; i <= k; ++i) a /= 2.0L * i;
      c[deg - 2 * k] = (k % 2 ? -a : a);
    }
    return c;
  };
  const auto a = coeffs(n), b = coeffs(m);
  long double sum = 0;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= m; ++j) {
      const int p = i + j;
      if (p % 2) continue;
      long double moment = 1;
      for (int k = p - 1; k > 0; k -= 2) moment *= k;
      sum += a[i] * b[j] * moment;
    }
  return sum;
}

/// Orthonormal cosine family on (0, L): 1/sqrt(L), sqrt(2/L) cos(n pi x / L).
inline double neumann_mode(int n, double x, double length) {
  return n == 0 ? 1 / std::sqrt(length) : std::sqrt(2 / length) * std::cos(n * pi * x / length);
}

inline double dirichlet_mode(int n, double x) { return std::sqrt(2.0) * std::sin((n + 1) * pi * x); }
inline double mixed_mode(int n, double x) { return std::sqrt(2.0) * std::sin((n + 0.5) * pi * x); }

/// V(z) = a int (phi^4 - 6 c phi^2 + 3 c^2) on (0, L) for phi = sum z_n e_n in
/// the four lowest cosine modes, c = sum c_n e_n^2; every integral by
/// adaptive quadrature, then contracted symbolically.
class QuarticEnergy {
 public:
  static constexpr int modes = 4;

  QuarticEnergy(double coupling, double length, const std::vector<double>& covariance)
      : coupling_(coupling) {
    auto e = [length](int n, double x) { return neumann_mode(n, x, length); };
    auto c = [&](double x) {
      double s = 0;
      for (int n = 0; n < modes; ++n) s += covariance[n] * e(n, x) * e(n, x);
      return s;
    };
    for (int i = 0; i < modes; ++i)
      for (int j = 0; j < modes; ++j) {
        quadratic_[i][j] = integrate([&](double x) { return c(x) * e(i, x) * e(j, x); }, 0, length);
        for (int k = 0; k < modes; ++k)
          for (int l = 0; l < modes; ++l)
            quartic_[i][j][k][l] =
                integrate([&](double x) { return e(i, x) * e(j, x) * e(k, x) * e(l, x); }, 0, length);
      }
    constant_ = integrate([&](double x) { return c(x) * c(x); }, 0, length);
  }

  template <class Vec>
  double operator()(const Vec& z) const {
    double phi4 = 0, phi2 = 0;
    for (int i = 0; i < modes; ++i)
      for (int j = 0; j < modes; ++j) {
        phi2 += quadratic_[i][j] * z[i] * z[j];
        for (int k = 0; k < modes; ++k)
          for (int l = 0; l < modes; ++l) phi4 += quartic_[i][j][k][l] * z[i] * z[j] * z[k] * z[l];
      }
    return coupling_ * (phi4 - 6 * phi2 + 3 * constant_);
  }

 private:
  double coupling_;
  double quartic_[modes][modes][modes][modes];
  double quadratic_[modes][modes];
  double constant_ = 0;
};

}  // namespace oracle
