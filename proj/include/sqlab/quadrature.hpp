#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace sqlab {

/// Gauss-Legendre rule with `order` nodes on [a, b], computed by Newton
/// iteration on the Legendre three-term recurrence.
template <typename Scalar = double>
std::pair<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>
gauss_legendre(int order, Scalar a = Scalar(-1), Scalar b = Scalar(1)) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (order < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
  Vec nodes(order), weights(order);
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar half_len = (b - a) / 2, mid = (a + b) / 2;
  for (int i = 0; i < (order + 1) / 2; ++i) {
    Scalar x = std::cos(pi * (Scalar(i) + Scalar(0.75)) / (Scalar(order) + Scalar(0.5)));
    Scalar dp = 0;
    for (int iter = 0; iter < 100; ++iter) {
      Scalar p0 = 1, p1 = x;
      for (int k = 2; k <= order; ++k) {
        const Scalar p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = order * (x * p1 - p0) / (x * x - 1);
      const Scalar dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < Scalar(1e-16)) break;
    }
    {
      // one more evaluation at the converged node for the weight
      Scalar p0 = 1, p1 = x;
      for (int k = 2; k <= order; ++k) {
        const Scalar p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = order * (x * p1 - p0) / (x * x - 1);
    }
    const Scalar w = 2 / ((1 - x * x) * dp * dp);
    nodes[i] = mid - half_len * x;
    nodes[order - 1 - i] = mid + half_len * x;
    weights[i] = weights[order - 1 - i] = w * half_len;
  }
  return {nodes, weights};
}

/// Gauss-Hermite rule for the standard normal weight: sum_i w_i f(x_i)
/// approximates E[f(N(0, 1))], exactly for polynomials of degree < 2 order.
/// Nodes from the Jacobi matrix (Golub-Welsch), polished by Newton steps on
/// He_order; weights from order! / (order He_{order-1}(x))^2.
template <typename Scalar = double>
std::pair<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>
gauss_hermite(int order) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (order < 1) throw std::invalid_argument("gauss_hermite: order must be >= 1");
  Vec diag = Vec::Zero(order), sub(std::max(order - 1, 0));
  for (int k = 0; k + 1 < order; ++k) sub[k] = std::sqrt(Scalar(k + 1));
  Eigen::SelfAdjointEigenSolver<Mat> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  Vec nodes = solver.eigenvalues(), weights(order);

  // He_n and He_{n-1} at x.
  auto hermite_pair = [order](Scalar x) {
    Scalar prev = 1, cur = x;
    if (order == 1) return std::pair<Scalar, Scalar>{cur, prev};
    for (int k = 1; k < order; ++k) {
      const Scalar next = x * cur - Scalar(k) * prev;
      prev = cur;
      cur = next;
    }
    return std::pair<Scalar, Scalar>{cur, prev};
  };
  Scalar factorial = 1;
  for (int k = 2; k <= order; ++k) factorial *= Scalar(k);
  for (int i = 0; i < order; ++i) {
    Scalar x = nodes[i];
    for (int iter = 0; iter < 3; ++iter) {
      const auto [p, q] = hermite_pair(x);
      x -= p / (Scalar(order) * q);  // He_n' = n He_{n-1}
    }
    const Scalar q = hermite_pair(x).second;
    nodes[i] = x;
    weights[i] = factorial / (Scalar(order) * Scalar(order) * q * q);
  }
  return {nodes, weights};
}

}  // namespace sqlab
