#pragma once

#include <Eigen/Dense>

#include <memory>
#include <string>
#include <vector>

namespace sqlab {

/// Value, gradient and Hessian of a function of finitely many variables.
struct Jet {
  double value = 0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

/// Smooth outer function F(t_0, ..., t_{N-1}) built from a closed expression
/// set (constants, variables, +, -, *, integer powers, sin, cos, exp).
/// Derivatives up to second order are propagated by rule.
///
/// Prefix grammar (s-expressions):
///   expr  := number | xK | "(" op expr+ ")"
///   op    := + | - | * | pow | sin | cos | exp
/// where xK is the K-th argument and (pow e n) needs an integer literal n >= 0.
/// Example: (* (sin x0) (exp (* -0.5 x1)))
class OuterFunction {
 public:
  struct Node;

  OuterFunction() = default;
  static OuterFunction parse(const std::string& text, int arity = -1);

  /// Number of arguments (one more than the largest variable index, or the
  /// explicit arity passed to parse).
  int arity() const { return arity_; }
  const std::string& expression() const { return text_; }

  Jet evaluate(const Eigen::Ref<const Eigen::VectorXd>& t) const;
  double value(const Eigen::Ref<const Eigen::VectorXd>& t) const;

  /// Max relative discrepancy between rule derivatives and central finite
  /// differences at the probe points (one probe per column).
  double finite_difference_discrepancy(const Eigen::Ref<const Eigen::MatrixXd>& probes,
                                       double step = 1e-5) const;

 private:
  std::shared_ptr<const Node> root_;
  int arity_ = 0;
  std::string text_;
};

/// u(z) = F(<k_1, z>, ..., <k_N, z>) with directions stored as the columns of
/// a coefficient matrix.
struct CylinderFunction {
  Eigen::MatrixXd directions;
  OuterFunction outer;

  CylinderFunction() = default;
  CylinderFunction(Eigen::MatrixXd dirs, OuterFunction f);

  int arity() const { return static_cast<int>(directions.cols()); }
  Eigen::VectorXd arguments(const Eigen::Ref<const Eigen::VectorXd>& z) const;
  double eval(const Eigen::Ref<const Eigen::VectorXd>& z) const;
  /// H-gradient sum_j d_jF(...) k_j.
  Eigen::VectorXd gradient_H(const Eigen::Ref<const Eigen::VectorXd>& z) const;
  /// d/ds u(z + s h) at s = 0.
  double directional(const Eigen::Ref<const Eigen::VectorXd>& z,
                     const Eigen::Ref<const Eigen::VectorXd>& h) const;
};

}  // namespace sqlab
