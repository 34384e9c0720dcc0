#pragma once

/// \file expr.hpp
/// Scalar expressions over the supported primitive set, with first and
/// second input partials.

#include "tsr/jet.hpp"

#include <concepts>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace tsr::ad {

/// Immutable expression tree. Build with `input`, `constant` and `apply`;
/// `apply` rejects any primitive outside the supported set.
///
/// Supported primitive names and their parameters:
///   affine  (n >= 1 args)  params = {w_1..w_n, c}   -> sum w_i a_i + c
///   add     (2 args)
///   mul     (2 args)                                -> product
///   tanh, square, softplus, sigmoid (1 arg)
///   relu    (1 arg)                                 -> max(0, a), d/da = 0 at 0
///   softmin (2 args)       params = {eps}
class Expr {
 public:
  static Expr input(int index);
  static Expr constant(double c);
  static Expr apply(std::string_view primitive, std::vector<Expr> args,
                    std::vector<double> params = {});

  Jet<double> eval(const JetLayout& layout, std::span<const double> x) const;
  double value(std::span<const double> x) const;
  /// Largest input index referenced, or -1.
  int max_input() const;

 private:
  struct Node;
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);

struct InputDerivatives {
  double value = 0.0;
  std::vector<double> gradient;  // n
  std::vector<double> hessian;   // n*n row-major; empty for order 1
};

InputDerivatives eval_with_input_derivatives(const Expr& f, std::span<const double> x, int order);

namespace detail {
InputDerivatives collect(const Jet<double>& j, int order);
JetLayout layout_for(int n, int order);
}  // namespace detail

/// Same contract for a generic callable written against Jet<double>
/// (receives one seeded jet per input).
template <class F>
  requires std::invocable<F, std::span<const Jet<double>>>
InputDerivatives eval_with_input_derivatives(F&& f, std::span<const double> x, int order) {
  const JetLayout layout = detail::layout_for(static_cast<int>(x.size()), order);
  std::vector<Jet<double>> in;
  in.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) in.push_back(make_variable(layout, x[i], static_cast<int>(i)));
  Jet<double> out = f(std::span<const Jet<double>>(in));
  return detail::collect(out, order);
}

}  // namespace tsr::ad
