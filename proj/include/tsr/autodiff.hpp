#pragma once

/// \file autodiff.hpp
/// Reverse-mode differentiation over small dense batches.
///
/// Every node on a Tape holds an Eigen matrix; by convention rows are
/// features (neurons) and columns are batch entries (sample points). The
/// primitive set is closed: affine maps (matmul + bias), elementwise
/// add/sub/product, scale/shift by constants, tanh, softplus, sigmoid,
/// square, max(0, .) and its Heaviside step, column/row concatenation and a
/// full sum. Input derivatives up to second order are obtained by running
/// Jet<Tensor> arithmetic (see jet.hpp) on top of this tape, so parameter
/// gradients of expressions such as rho_t + f'(rho) rho_x come out of a
/// single backward sweep.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tsr::ad {

using Matrix = Eigen::MatrixXd;

enum class Op : std::uint8_t {
  Leaf,
  MatMul,
  AddBias,
  Add,
  Sub,
  Mul,
  Scale,
  Shift,
  Tanh,
  Softplus,
  Sigmoid,
  Relu,
  Step,
  Square,
  Sum,
  HConcat,
  VConcat,
};

std::string_view primitive_name(Op op);

/// Thrown when an expression asks for a primitive outside the fixed set.
class UnsupportedPrimitive : public std::invalid_argument {
 public:
  explicit UnsupportedPrimitive(std::string name)
      : std::invalid_argument("unsupported primitive: " + name), name_(std::move(name)) {}
  const std::string& primitive() const noexcept { return name_; }

 private:
  std::string name_;
};

/// Thrown when a cost evaluates to NaN or infinity.
class NonFiniteCost : public std::runtime_error {
 public:
  NonFiniteCost(int cost_index, const std::string& what)
      : std::runtime_error(what), cost_index_(cost_index) {}
  /// 1-based cost index, or 0 when the cost is anonymous.
  int cost_index() const noexcept { return cost_index_; }

 private:
  int cost_index_;
};

struct BlockShape {
  std::string name;
  int rows = 0;
  int cols = 0;
  int size() const { return rows * cols; }
  bool operator==(const BlockShape&) const = default;
};

/// Flat parameter vector layout: a sequence of named column-major blocks.
class ParameterLayout {
 public:
  ParameterLayout() = default;
  explicit ParameterLayout(std::vector<BlockShape> blocks);

  int add(BlockShape block);
  int size() const { return total_; }
  int block_count() const { return static_cast<int>(blocks_.size()); }
  const BlockShape& block(int i) const { return blocks_.at(i); }
  int offset(int i) const { return offsets_.at(i); }
  int find(std::string_view name) const;  // -1 when absent

  bool operator==(const ParameterLayout&) const = default;

 private:
  std::vector<BlockShape> blocks_;
  std::vector<int> offsets_;
  int total_ = 0;
};

struct ParameterGradient {
  ParameterLayout layout;
  std::vector<double> values;
};

class Tape;

/// Handle to one node of a Tape. Cheap to copy; only valid while the tape
/// that created it is alive and has not been cleared.
class Tensor {
 public:
  Tensor() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Tensor(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void clear();
  int size() const { return static_cast<int>(nodes_.size()); }

  Tensor constant(Matrix value);
  Tensor constant(double value);
  Tensor constant_like(const Tensor& shape_of, double fill);

  /// Binds every block of `layout` as a differentiable leaf, in block order.
  std::vector<Tensor> bind(const ParameterLayout& layout, std::span<const double> values);

  /// Same blocks as `bind`, but as constants (forward-only evaluation).
  std::vector<Tensor> bind_constant(const ParameterLayout& layout,
                                    std::span<const double> values);

  /// Gradient of the 1x1 node `root` with respect to the bound parameters.
  std::vector<double> backward(const Tensor& root);

  // Primitive constructors. Shapes are checked; Add/Sub/Mul broadcast a 1x1
  // operand against any shape.
  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor add_bias(const Tensor& a, const Tensor& bias);
  Tensor add(const Tensor& a, const Tensor& b);
  Tensor sub(const Tensor& a, const Tensor& b);
  Tensor mul(const Tensor& a, const Tensor& b);
  Tensor scale(const Tensor& a, double c);
  Tensor shift(const Tensor& a, double c);
  Tensor unary(Op op, const Tensor& a);
  Tensor sum(const Tensor& a);
  Tensor hconcat(std::span<const Tensor> parts);
  Tensor vconcat(std::span<const Tensor> parts);

  const Matrix& value(int id) const { return nodes_[id].value; }

 private:
  struct Node {
    Op op = Op::Leaf;
    int a = -1;
    int b = -1;
    double c = 0.0;
    int param_offset = -1;  // leaves bound to a flat parameter vector
    std::vector<int> parts;  // concatenation inputs
    bool live = false;       // depends on a bound parameter
    Matrix value;
  };

  Tensor push(Node node);
  int check(const Tensor& t) const;

  std::vector<Node> nodes_;
  int param_size_ = 0;
};

// Operator sugar; all operands must come from the same tape.
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator+(const Tensor& a, double c);
Tensor operator+(double c, const Tensor& a);
Tensor operator-(const Tensor& a, double c);
Tensor operator-(double c, const Tensor& a);
Tensor operator*(const Tensor& a, double c);
Tensor operator*(double c, const Tensor& a);
Tensor operator-(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add_bias(const Tensor& a, const Tensor& bias);
Tensor tanh(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor step(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor ones_like(const Tensor& a);

// Scalar counterparts so that generic code can be instantiated on double.
double softplus(double x);
double sigmoid(double x);
double relu(double x);
double step(double x);
double square(double x);
inline double ones_like(double) { return 1.0; }

/// Gradient of a tape-built scalar cost with respect to a flat parameter
/// vector. `cost` receives the bound leaves (one per layout block) and must
/// return a 1x1 tensor. Throws NonFiniteCost (tagged with `cost_index`) if the
/// cost value is not finite.
template <class CostFn>
ParameterGradient gradient(CostFn&& cost, const ParameterLayout& layout,
                           std::span<const double> theta, int cost_index = 0) {
  Tape tape;
  auto leaves = tape.bind(layout, theta);
  Tensor root = cost(tape, std::span<const Tensor>(leaves));
  const double v = root.scalar();
  if (!std::isfinite(v)) {
    throw NonFiniteCost(cost_index, "non-finite cost" + (cost_index > 0
                                                             ? " L" + std::to_string(cost_index)
                                                             : std::string()));
  }
  return ParameterGradient{layout, tape.backward(root)};
}

}  // namespace tsr::ad
