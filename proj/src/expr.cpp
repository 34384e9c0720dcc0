#include "tsr/expr.hpp"

#include <algorithm>
#include <string>

namespace tsr::ad {

enum class ExprKind { Input, Constant, Affine, Add, Mul, Tanh, Square, Softplus, Sigmoid, Relu, SoftMin };

struct Expr::Node {
  ExprKind kind;
  int index = 0;
  std::vector<double> params;
  std::vector<Expr> args;
};

Expr Expr::input(int index) {
  if (index < 0) throw std::invalid_argument("input index must be nonnegative");
  return Expr(std::make_shared<const Node>(Node{ExprKind::Input, index, {}, {}}));
}

Expr Expr::constant(double c) {
  return Expr(std::make_shared<const Node>(Node{ExprKind::Constant, 0, {c}, {}}));
}

Expr Expr::apply(std::string_view primitive, std::vector<Expr> args, std::vector<double> params) {
  struct Entry {
    std::string_view name;
    ExprKind kind;
    int arity;  // -1: variadic
    int params;  // -1: arity + 1
  };
  static constexpr Entry table[] = {
      {"affine", ExprKind::Affine, -1, -1}, {"add", ExprKind::Add, 2, 0},
      {"mul", ExprKind::Mul, 2, 0},         {"tanh", ExprKind::Tanh, 1, 0},
      {"square", ExprKind::Square, 1, 0},   {"softplus", ExprKind::Softplus, 1, 0},
      {"sigmoid", ExprKind::Sigmoid, 1, 0}, {"relu", ExprKind::Relu, 1, 0},
      {"softmin", ExprKind::SoftMin, 2, 1},
  };
  const auto* it = std::find_if(std::begin(table), std::end(table),
                                [&](const Entry& e) { return e.name == primitive; });
  if (it == std::end(table)) throw UnsupportedPrimitive(std::string(primitive));
  const int n = static_cast<int>(args.size());
  if ((it->arity >= 0 && n != it->arity) || (it->arity < 0 && n < 1)) {
    throw std::invalid_argument(std::string(primitive) + ": wrong number of arguments");
  }
  const int np = it->params < 0 ? n + 1 : it->params;
  if (static_cast<int>(params.size()) != np) {
    throw std::invalid_argument(std::string(primitive) + ": wrong number of parameters");
  }
  if (it->kind == ExprKind::SoftMin && !(params[0] > 0.0)) {
    throw std::invalid_argument("softmin: width must be positive");
  }
  return Expr(std::make_shared<const Node>(Node{it->kind, 0, std::move(params), std::move(args)}));
}

Jet<double> Expr::eval(const JetLayout& layout, std::span<const double> x) const {
  const Node& n = *node_;
  switch (n.kind) {
    case ExprKind::Input:
      if (n.index >= static_cast<int>(x.size())) throw std::out_of_range("expression input index");
      if (n.index >= layout.inputs) return make_constant(layout, x[n.index]);
      return make_variable(layout, x[n.index], n.index);
    case ExprKind::Constant: return make_constant(layout, n.params[0]);
    case ExprKind::Affine: {
      Jet<double> acc = make_constant(layout, n.params.back());
      for (std::size_t i = 0; i < n.args.size(); ++i) acc = acc + n.params[i] * n.args[i].eval(layout, x);
      return acc;
    }
    case ExprKind::Add: return n.args[0].eval(layout, x) + n.args[1].eval(layout, x);
    case ExprKind::Mul: return n.args[0].eval(layout, x) * n.args[1].eval(layout, x);
    case ExprKind::Tanh: return tanh(n.args[0].eval(layout, x));
    case ExprKind::Square: return square(n.args[0].eval(layout, x));
    case ExprKind::Softplus: return softplus(n.args[0].eval(layout, x));
    case ExprKind::Sigmoid: return sigmoid(n.args[0].eval(layout, x));
    case ExprKind::Relu: return relu(n.args[0].eval(layout, x));
    case ExprKind::SoftMin:
      return softmin(n.args[0].eval(layout, x), n.args[1].eval(layout, x), n.params[0]);
  }
  throw std::logic_error("corrupt expression");
}

double Expr::value(std::span<const double> x) const {
  static const JetLayout none{0, {}};
  return eval(none, x).v;
}

int Expr::max_input() const {
  const Node& n = *node_;
  int m = n.kind == ExprKind::Input ? n.index : -1;
  for (const auto& a : n.args) m = std::max(m, a.max_input());
  return m;
}

Expr operator+(const Expr& a, const Expr& b) { return Expr::apply("add", {a, b}); }
Expr operator*(const Expr& a, const Expr& b) { return Expr::apply("mul", {a, b}); }

namespace detail {

JetLayout layout_for(int n, int order) {
  if (order == 1) return JetLayout::first_order(n);
  if (order == 2) return JetLayout::full(n);
  throw std::invalid_argument("derivative order must be 1 or 2");
}

InputDerivatives collect(const Jet<double>& j, int order) {
  const int n = j.layout->inputs;
  InputDerivatives out;
  out.value = j.v;
  out.gradient.assign(n, 0.0);
  for (int i = 0; i < n; ++i) out.gradient[i] = j.d[i].value_or(0.0);
  if (order == 2) {
    out.hessian.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (std::size_t p = 0; p < j.layout->pairs.size(); ++p) {
      const auto [a, b] = j.layout->pairs[p];
      const double v = j.h[p].value_or(0.0);
      out.hessian[a * n + b] = v;
      out.hessian[b * n + a] = v;
    }
  }
  return out;
}

}  // namespace detail

InputDerivatives eval_with_input_derivatives(const Expr& f, std::span<const double> x, int order) {
  if (f.max_input() >= static_cast<int>(x.size())) {
    throw std::invalid_argument("expression references more inputs than supplied");
  }
  const JetLayout layout = detail::layout_for(static_cast<int>(x.size()), order);
  return detail::collect(f.eval(layout, x), order);
}

}  // namespace tsr::ad
