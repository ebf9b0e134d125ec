#include "sqlab/cylinder_function.hpp"

#include "sqlab/errors.hpp"

#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <variant>

namespace sqlab {

enum class Op { Constant, Variable, Add, Sub, Mul, Pow, Sin, Cos, Exp };

struct OuterFunction::Node {
  Op op = Op::Constant;
  double constant = 0;
  int index = 0;  // variable index or integer exponent
  std::vector<std::shared_ptr<const Node>> args;
};

namespace {

using NodePtr = std::shared_ptr<const OuterFunction::Node>;

class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text) {}

  NodePtr parse_all() {
    NodePtr root = parse_expr();
    skip_space();
    if (pos_ != text_.size()) fail("trailing characters");
    return root;
  }

  int max_variable() const { return max_var_; }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("outer expression: " + what + " at offset " + std::to_string(pos_) +
                      " in '" + text_ + "'");
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  std::string token() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) &&
           text_[pos_] != '(' && text_[pos_] != ')')
      ++pos_;
    if (start == pos_) fail("expected token");
    return text_.substr(start, pos_ - start);
  }

  NodePtr parse_expr() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end");
    if (text_[pos_] == '(') {
      ++pos_;
      const std::string op = token();
      auto node = std::make_shared<OuterFunction::Node>();
      if (op == "+") node->op = Op::Add;
      else if (op == "-") node->op = Op::Sub;
      else if (op == "*") node->op = Op::Mul;
      else if (op == "pow") node->op = Op::Pow;
      else if (op == "sin") node->op = Op::Sin;
      else if (op == "cos") node->op = Op::Cos;
      else if (op == "exp") node->op = Op::Exp;
      else fail("unknown operator '" + op + "'");
      skip_space();
      while (pos_ < text_.size() && text_[pos_] != ')') {
        node->args.push_back(parse_expr());
        skip_space();
      }
      if (pos_ >= text_.size()) fail("missing ')'");
      ++pos_;
      const std::size_t nargs = node->args.size();
      switch (node->op) {
        case Op::Sin: case Op::Cos: case Op::Exp:
          if (nargs != 1) fail(op + " takes one argument");
          break;
        case Op::Pow: {
          if (nargs != 2 || node->args[1]->op != Op::Constant) fail("pow takes (pow expr integer)");
          const double e = node->args[1]->constant;
          if (e < 0 || e != std::floor(e)) fail("pow exponent must be a non-negative integer");
          node->index = static_cast<int>(e);
          node->args.resize(1);
          break;
        }
        case Op::Sub:
          if (nargs < 1) fail("- needs an argument");
          break;
        default:
          if (nargs < 2) fail(op + " needs at least two arguments");
      }
      return node;
    }
    if (text_[pos_] == ')') fail("unexpected ')'");
    const std::string tok = token();
    auto node = std::make_shared<OuterFunction::Node>();
    if (tok.size() >= 2 && tok[0] == 'x' && std::isdigit(static_cast<unsigned char>(tok[1]))) {
      node->op = Op::Variable;
      try {
        std::size_t used = 0;
        node->index = std::stoi(tok.substr(1), &used);
        if (used != tok.size() - 1) fail("bad variable '" + tok + "'");
      } catch (const std::logic_error&) {
        fail("bad variable '" + tok + "'");
      }
      max_var_ = std::max(max_var_, node->index);
      return node;
    }
    node->op = Op::Constant;
    try {
      std::size_t used = 0;
      node->constant = std::stod(tok, &used);
      if (used != tok.size()) fail("bad number '" + tok + "'");
    } catch (const std::logic_error&) {
      fail("bad number '" + tok + "'");
    }
    return node;
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  int max_var_ = -1;
};

Jet constant_jet(double c, int n) {
  return Jet{c, Eigen::VectorXd::Zero(n), Eigen::MatrixXd::Zero(n, n)};
}

Jet product(const Jet& a, const Jet& b) {
  Jet out;
  out.value = a.value * b.value;
  out.gradient = a.value * b.gradient + b.value * a.gradient;
  out.hessian = a.value * b.hessian + b.value * a.hessian + a.gradient * b.gradient.transpose() +
                b.gradient * a.gradient.transpose();
  return out;
}

// Applies a scalar function with derivatives (f, f', f'') to a jet.
Jet compose(const Jet& a, double f, double df, double d2f) {
  Jet out;
  out.value = f;
  out.gradient = df * a.gradient;
  out.hessian = df * a.hessian + d2f * a.gradient * a.gradient.transpose();
  return out;
}

Jet eval_node(const OuterFunction::Node& node, const Eigen::Ref<const Eigen::VectorXd>& t) {
  const int n = static_cast<int>(t.size());
  switch (node.op) {
    case Op::Constant:
      return constant_jet(node.constant, n);
    case Op::Variable: {
      Jet j = constant_jet(t[node.index], n);
      j.gradient[node.index] = 1.0;
      return j;
    }
    case Op::Add: {
      Jet acc = eval_node(*node.args[0], t);
      for (std::size_t i = 1; i < node.args.size(); ++i) {
        const Jet b = eval_node(*node.args[i], t);
        acc.value += b.value;
        acc.gradient += b.gradient;
        acc.hessian += b.hessian;
      }
      return acc;
    }
    case Op::Sub: {
      Jet acc = eval_node(*node.args[0], t);
      if (node.args.size() == 1) {
        acc.value = -acc.value;
        acc.gradient = -acc.gradient;
        acc.hessian = -acc.hessian;
        return acc;
      }
      for (std::size_t i = 1; i < node.args.size(); ++i) {
        const Jet b = eval_node(*node.args[i], t);
        acc.value -= b.value;
        acc.gradient -= b.gradient;
        acc.hessian -= b.hessian;
      }
      return acc;
    }
    case Op::Mul: {
      Jet acc = eval_node(*node.args[0], t);
      for (std::size_t i = 1; i < node.args.size(); ++i) acc = product(acc, eval_node(*node.args[i], t));
      return acc;
    }
    case Op::Pow: {
      const Jet a = eval_node(*node.args[0], t);
      const int p = node.index;
      const double x = a.value;
      const double f = std::pow(x, p);
      const double df = p >= 1 ? p * std::pow(x, p - 1) : 0.0;
      const double d2f = p >= 2 ? p * (p - 1) * std::pow(x, p - 2) : 0.0;
      return compose(a, f, df, d2f);
    }
    case Op::Sin: {
      const Jet a = eval_node(*node.args[0], t);
      const double s = std::sin(a.value), c = std::cos(a.value);
      return compose(a, s, c, -s);
    }
    case Op::Cos: {
      const Jet a = eval_node(*node.args[0], t);
      const double s = std::sin(a.value), c = std::cos(a.value);
      return compose(a, c, -s, -c);
    }
    case Op::Exp: {
      const Jet a = eval_node(*node.args[0], t);
      const double e = std::exp(a.value);
      return compose(a, e, e, e);
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace

OuterFunction OuterFunction::parse(const std::string& text, int arity) {
  Parser parser(text);
  OuterFunction f;
  f.root_ = parser.parse_all();
  f.text_ = text;
  const int needed = parser.max_variable() + 1;
  if (arity >= 0 && arity < needed)
    throw ConfigError("outer expression '" + text + "' uses more variables than its arity");
  f.arity_ = std::max({arity, needed, 1});
  return f;
}

Jet OuterFunction::evaluate(const Eigen::Ref<const Eigen::VectorXd>& t) const {
  if (!root_) throw std::logic_error("OuterFunction: empty expression");
  if (t.size() != arity_) throw DimensionMismatch("OuterFunction: wrong number of arguments");
  return eval_node(*root_, t);
}

double OuterFunction::value(const Eigen::Ref<const Eigen::VectorXd>& t) const {
  return evaluate(t).value;
}

double OuterFunction::finite_difference_discrepancy(const Eigen::Ref<const Eigen::MatrixXd>& probes,
                                                    double step) const {
  double worst = 0;
  for (Eigen::Index p = 0; p < probes.cols(); ++p) {
    const Eigen::VectorXd t = probes.col(p);
    const Jet jet = evaluate(t);
    for (int i = 0; i < arity_; ++i) {
      Eigen::VectorXd tp = t, tm = t;
      tp[i] += step;
      tm[i] -= step;
      const Jet jp = evaluate(tp), jm = evaluate(tm);
      const double fd_grad = (jp.value - jm.value) / (2 * step);
      const double scale = std::max(1.0, std::abs(jet.gradient[i]));
      worst = std::max(worst, std::abs(fd_grad - jet.gradient[i]) / scale);
      for (int j = 0; j < arity_; ++j) {
        const double fd_hess = (jp.gradient[j] - jm.gradient[j]) / (2 * step);
        const double hscale = std::max(1.0, std::abs(jet.hessian(i, j)));
        worst = std::max(worst, std::abs(fd_hess - jet.hessian(i, j)) / hscale);
      }
    }
  }
  return worst;
}

CylinderFunction::CylinderFunction(Eigen::MatrixXd dirs, OuterFunction f)
    : directions(std::move(dirs)), outer(std::move(f)) {
  if (directions.cols() < 1) throw std::invalid_argument("CylinderFunction needs at least one direction");
  if (outer.arity() != directions.cols())
    throw DimensionMismatch("CylinderFunction: outer arity does not match number of directions");
}

Eigen::VectorXd CylinderFunction::arguments(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  if (z.size() != directions.rows()) throw DimensionMismatch("CylinderFunction: state length mismatch");
  return directions.transpose() * z;
}

double CylinderFunction::eval(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  return outer.value(arguments(z));
}

Eigen::VectorXd CylinderFunction::gradient_H(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  return directions * outer.evaluate(arguments(z)).gradient;
}

double CylinderFunction::directional(const Eigen::Ref<const Eigen::VectorXd>& z,
                                     const Eigen::Ref<const Eigen::VectorXd>& h) const {
  return gradient_H(z).dot(h);
}

}  // namespace sqlab
