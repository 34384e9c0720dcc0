#pragma once

/// \file jet.hpp
/// Truncated second-order Taylor arithmetic ("jets") over a scalar-like type.
///
/// A Jet tracks a value, its first partials with respect to `inputs`
/// designated inputs, and a chosen subset of second partials. Instantiated on
/// double it is plain forward mode; instantiated on ad::Tensor every
/// component is itself a tape node, so a single backward sweep yields
/// parameter gradients of any expression built from input derivatives.
/// Structurally zero components are carried as empty optionals and cost
/// nothing.

#include "tsr/autodiff.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace tsr::ad {

/// Which derivatives a Jet carries. `pairs` lists the tracked second-order
/// partials (i <= j).
struct JetLayout {
  int inputs = 0;
  std::vector<std::array<int, 2>> pairs;

  static JetLayout first_order(int n) { return JetLayout{n, {}}; }
  static JetLayout full(int n) {
    JetLayout l{n, {}};
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) l.pairs.push_back({i, j});
    }
    return l;
  }
  /// Only the listed diagonal second derivatives.
  static JetLayout diagonal(int n, std::vector<int> which) {
    JetLayout l{n, {}};
    for (int i : which) l.pairs.push_back({i, i});
    return l;
  }

  int pair_index(int i, int j) const {
    if (i > j) std::swap(i, j);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      if (pairs[p][0] == i && pairs[p][1] == j) return static_cast<int>(p);
    }
    return -1;
  }
  bool operator==(const JetLayout&) const = default;
};

template <class T>
struct Jet {
  using Comp = std::optional<T>;

  const JetLayout* layout = nullptr;
  T v{};
  std::vector<Comp> d;  // size layout->inputs
  std::vector<Comp> h;  // size layout->pairs.size()

  /// Partial derivative along input i (throws if structurally zero and the
  /// caller needs a concrete value; use `d[i].has_value()` to test).
  const T& grad(int i) const {
    if (!d.at(i)) throw std::logic_error("jet: first derivative is structurally zero");
    return *d[i];
  }
  const T& hess(int i, int j) const {
    const int p = layout->pair_index(i, j);
    if (p < 0) throw std::logic_error("jet: second derivative not tracked");
    if (!h[p]) throw std::logic_error("jet: second derivative is structurally zero");
    return *h[p];
  }
};

namespace jet_detail {

template <class T>
std::optional<T> add(const std::optional<T>& a, const std::optional<T>& b) {
  if (a && b) return *a + *b;
  if (a) return a;
  return b;
}

template <class T>
std::optional<T> sub(const std::optional<T>& a, const std::optional<T>& b) {
  if (a && b) return *a - *b;
  if (a) return a;
  if (b) return -*b;
  return std::nullopt;
}

template <class T, class S>
std::optional<T> mul(const S& s, const std::optional<T>& a) {
  if (!a) return std::nullopt;
  return s * *a;
}

template <class T>
std::optional<T> mul(const std::optional<T>& a, const std::optional<T>& b) {
  if (a && b) return *a * *b;
  return std::nullopt;
}

inline void check_same(const void* a, const void* b) {
  if (a != b) throw std::logic_error("jet: mixing different layouts");
}

}  // namespace jet_detail

template <class T>
Jet<T> make_constant(const JetLayout& layout, T v) {
  Jet<T> j;
  j.layout = &layout;
  j.v = std::move(v);
  j.d.assign(layout.inputs, std::nullopt);
  j.h.assign(layout.pairs.size(), std::nullopt);
  return j;
}

/// Seed a jet for input `index`: d/dx_index = 1.
template <class T>
Jet<T> make_variable(const JetLayout& layout, T v, int index) {
  Jet<T> j = make_constant(layout, v);
  j.d.at(index) = ones_like(v);
  return j;
}

/// Seed a jet whose first derivatives are supplied directly (vector-valued
/// inputs such as a stacked (t, x) batch).
template <class T>
Jet<T> make_seeded(const JetLayout& layout, T v, std::vector<std::optional<T>> d) {
  Jet<T> j = make_constant(layout, std::move(v));
  if (static_cast<int>(d.size()) != layout.inputs) throw std::invalid_argument("jet seed size");
  j.d = std::move(d);
  return j;
}

template <class T>
Jet<T> operator+(const Jet<T>& a, const Jet<T>& b) {
  jet_detail::check_same(a.layout, b.layout);
  Jet<T> r;
  r.layout = a.layout;
  r.v = a.v + b.v;
  r.d.resize(a.d.size());
  r.h.resize(a.h.size());
  for (std::size_t k = 0; k < a.d.size(); ++k) r.d[k] = jet_detail::add(a.d[k], b.d[k]);
  for (std::size_t p = 0; p < a.h.size(); ++p) r.h[p] = jet_detail::add(a.h[p], b.h[p]);
  return r;
}

template <class T>
Jet<T> operator-(const Jet<T>& a, const Jet<T>& b) {
  jet_detail::check_same(a.layout, b.layout);
  Jet<T> r;
  r.layout = a.layout;
  r.v = a.v - b.v;
  r.d.resize(a.d.size());
  r.h.resize(a.h.size());
  for (std::size_t k = 0; k < a.d.size(); ++k) r.d[k] = jet_detail::sub(a.d[k], b.d[k]);
  for (std::size_t p = 0; p < a.h.size(); ++p) r.h[p] = jet_detail::sub(a.h[p], b.h[p]);
  return r;
}

template <class T>
Jet<T> operator*(const Jet<T>& a, const Jet<T>& b) {
  using jet_detail::add;
  using jet_detail::mul;
  jet_detail::check_same(a.layout, b.layout);
  Jet<T> r;
  r.layout = a.layout;
  r.v = a.v * b.v;
  r.d.resize(a.d.size());
  r.h.resize(a.h.size());
  for (std::size_t k = 0; k < a.d.size(); ++k) {
    r.d[k] = add(mul(b.v, a.d[k]), mul(a.v, b.d[k]));
  }
  const auto& pairs = a.layout->pairs;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const int i = pairs[p][0], j = pairs[p][1];
    auto t = add(mul(b.v, a.h[p]), mul(a.v, b.h[p]));
    t = add(t, mul(a.d[i], b.d[j]));
    t = add(t, mul(a.d[j], b.d[i]));
    r.h[p] = std::move(t);
  }
  return r;
}

template <class T>
Jet<T> operator*(double c, const Jet<T>& a) {
  Jet<T> r;
  r.layout = a.layout;
  r.v = c * a.v;
  r.d.resize(a.d.size());
  r.h.resize(a.h.size());
  for (std::size_t k = 0; k < a.d.size(); ++k) r.d[k] = jet_detail::mul(c, a.d[k]);
  for (std::size_t p = 0; p < a.h.size(); ++p) r.h[p] = jet_detail::mul(c, a.h[p]);
  return r;
}

template <class T>
Jet<T> operator*(const Jet<T>& a, double c) {
  return c * a;
}

template <class T>
Jet<T> operator+(const Jet<T>& a, double c) {
  Jet<T> r = a;
  r.v = a.v + c;
  return r;
}

template <class T>
Jet<T> operator+(double c, const Jet<T>& a) {
  return a + c;
}

template <class T>
Jet<T> operator-(const Jet<T>& a, double c) {
  return a + (-c);
}

template <class T>
Jet<T> operator-(double c, const Jet<T>& a) {
  return ((-1.0) * a) + c;
}

template <class T>
Jet<T> operator-(const Jet<T>& a) {
  return (-1.0) * a;
}

/// Multiply every component by a plain value (not itself a jet).
template <class T>
Jet<T> scale_by(const T& s, const Jet<T>& a) {
  Jet<T> r;
  r.layout = a.layout;
  r.v = s * a.v;
  r.d.resize(a.d.size());
  r.h.resize(a.h.size());
  for (std::size_t k = 0; k < a.d.size(); ++k) r.d[k] = jet_detail::mul(s, a.d[k]);
  for (std::size_t p = 0; p < a.h.size(); ++p) r.h[p] = jet_detail::mul(s, a.h[p]);
  return r;
}

/// Chain rule for a scalar map with value y, first derivative d1 and
/// (optional, absent = 0) second derivative d2, all evaluated at a.v.
template <class T>
Jet<T> chain(const Jet<T>& a, T y, const T& d1, const std::optional<T>& d2) {
  using jet_detail::add;
  using jet_detail::mul;
  Jet<T> r;
  r.layout = a.layout;
  r.v = std::move(y);
  r.d.resize(a.d.size());
  r.h.resize(a.h.size());
  for (std::size_t k = 0; k < a.d.size(); ++k) r.d[k] = mul(d1, a.d[k]);
  const auto& pairs = a.layout->pairs;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const int i = pairs[p][0], j = pairs[p][1];
    auto t = mul(d1, a.h[p]);
    if (d2) t = add(t, mul(*d2, mul(a.d[i], a.d[j])));
    r.h[p] = std::move(t);
  }
  return r;
}

namespace jet_detail {

template <class T>
bool any_first(const Jet<T>& a) {
  for (const auto& c : a.d) {
    if (c) return true;
  }
  for (const auto& c : a.h) {
    if (c) return true;
  }
  return false;
}

template <class T>
bool any_second(const Jet<T>& a) {
  for (const auto& p : a.layout->pairs) {
    if (a.d[p[0]] && a.d[p[1]]) return true;
  }
  return false;
}

}  // namespace jet_detail

// Derivative factors are only built when the jet carries components that
// need them, so value-only jets cost no more than plain evaluation.

template <class T>
Jet<T> tanh(const Jet<T>& a) {
  using std::tanh;
  T y = tanh(a.v);
  if (!jet_detail::any_first(a)) return make_constant(*a.layout, std::move(y));
  T d1 = 1.0 - y * y;
  std::optional<T> d2;
  if (jet_detail::any_second(a)) d2 = -2.0 * (y * d1);
  return chain(a, std::move(y), d1, d2);
}

template <class T>
Jet<T> softplus(const Jet<T>& a) {
  T y = softplus(a.v);
  if (!jet_detail::any_first(a)) return make_constant(*a.layout, std::move(y));
  T d1 = sigmoid(a.v);
  std::optional<T> d2;
  if (jet_detail::any_second(a)) d2 = d1 * (1.0 - d1);
  return chain(a, std::move(y), d1, d2);
}

template <class T>
Jet<T> sigmoid(const Jet<T>& a) {
  T y = sigmoid(a.v);
  if (!jet_detail::any_first(a)) return make_constant(*a.layout, std::move(y));
  T d1 = y * (1.0 - y);
  std::optional<T> d2;
  if (jet_detail::any_second(a)) d2 = d1 * (1.0 - 2.0 * y);
  return chain(a, y, d1, d2);
}

/// max(0, x): derivative taken as 0 at the kink, second derivative 0.
template <class T>
Jet<T> relu(const Jet<T>& a) {
  return chain(a, relu(a.v), step(a.v), std::optional<T>());
}

template <class T>
Jet<T> square(const Jet<T>& a) {
  return a * a;
}

/// Smooth minimum: b - eps * softplus((b - a) / eps). Concave in (a, b),
/// converges to min(a, b) with a maximal gap of eps * log 2.
template <class T>
Jet<T> softmin(const Jet<T>& a, const Jet<T>& b, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("softmin: width must be positive");
  return b - eps * softplus((1.0 / eps) * (b - a));
}

/// Dense affine layer on a vector-valued jet: W x + b.
inline Jet<Tensor> affine(const Tensor& weight, const Tensor& bias, const Jet<Tensor>& x) {
  Jet<Tensor> r;
  r.layout = x.layout;
  r.v = add_bias(matmul(weight, x.v), bias);
  r.d.resize(x.d.size());
  r.h.resize(x.h.size());
  for (std::size_t k = 0; k < x.d.size(); ++k) {
    if (x.d[k]) r.d[k] = matmul(weight, *x.d[k]);
  }
  for (std::size_t p = 0; p < x.h.size(); ++p) {
    if (x.h[p]) r.h[p] = matmul(weight, *x.h[p]);
  }
  return r;
}

}  // namespace tsr::ad
