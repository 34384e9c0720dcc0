#include "tsr/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace tsr::ad {

std::string_view primitive_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::MatMul: return "matmul";
    case Op::AddBias: return "add_bias";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Scale: return "scale";
    case Op::Shift: return "shift";
    case Op::Tanh: return "tanh";
    case Op::Softplus: return "softplus";
    case Op::Sigmoid: return "sigmoid";
    case Op::Relu: return "relu";
    case Op::Step: return "step";
    case Op::Square: return "square";
    case Op::Sum: return "sum";
    case Op::HConcat: return "hconcat";
    case Op::VConcat: return "vconcat";
  }
  return "unknown";
}

ParameterLayout::ParameterLayout(std::vector<BlockShape> blocks) {
  for (auto& b : blocks) add(std::move(b));
}

int ParameterLayout::add(BlockShape block) {
  if (block.rows < 1 || block.cols < 1) {
    throw std::invalid_argument("parameter block '" + block.name + "' has an empty shape");
  }
  offsets_.push_back(total_);
  total_ += block.size();
  blocks_.push_back(std::move(block));
  return static_cast<int>(blocks_.size()) - 1;
}

int ParameterLayout::find(std::string_view name) const {
  for (int i = 0; i < block_count(); ++i) {
    if (blocks_[i].name == name) return i;
  }
  return -1;
}

const Matrix& Tensor::value() const {
  if (!tape_) throw std::logic_error("use of an unbound tensor");
  return tape_->value(id_);
}

double Tensor::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw std::logic_error("tensor is not 1x1");
  return v(0, 0);
}

namespace {

double softplus_value(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

bool is_scalar(const Matrix& m) { return m.rows() == 1 && m.cols() == 1; }

void check_binary(const Matrix& a, const Matrix& b, std::string_view what) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return;
  if (is_scalar(a) || is_scalar(b)) return;
  throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

// Accumulate `g` into an adjoint of shape `target`, reducing over broadcasts.
void accumulate(Matrix& adj, bool& seen, const Matrix& target, const Matrix& g) {
  if (!seen) {
    adj.setZero(target.rows(), target.cols());
    seen = true;
  }
  if (is_scalar(target) && !is_scalar(g)) {
    adj(0, 0) += g.sum();
  } else {
    adj += g;
  }
}

}  // namespace

double softplus(double x) { return softplus_value(x); }
double sigmoid(double x) { return sigmoid_value(x); }
double relu(double x) { return x > 0.0 ? x : 0.0; }
double step(double x) { return x > 0.0 ? 1.0 : 0.0; }
double square(double x) { return x * x; }

void Tape::clear() {
  nodes_.clear();
  param_size_ = 0;
}

Tensor Tape::push(Node node) {
  if (node.param_offset >= 0) node.live = true;
  if (node.a >= 0 && nodes_[node.a].live) node.live = true;
  if (node.b >= 0 && nodes_[node.b].live) node.live = true;
  for (int p : node.parts) node.live = node.live || nodes_[p].live;
  nodes_.push_back(std::move(node));
  return Tensor(this, static_cast<int>(nodes_.size()) - 1);
}

int Tape::check(const Tensor& t) const {
  if (t.tape_ != this) throw std::logic_error("tensor belongs to a different tape");
  return t.id_;
}

Tensor Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Tensor Tape::constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

Tensor Tape::constant_like(const Tensor& shape_of, double fill) {
  const Matrix& s = value(check(shape_of));
  return constant(Matrix::Constant(s.rows(), s.cols(), fill));
}

std::vector<Tensor> Tape::bind(const ParameterLayout& layout, std::span<const double> values) {
  if (static_cast<int>(values.size()) != layout.size()) {
    throw std::invalid_argument("parameter vector does not match layout size");
  }
  if (param_size_ != 0) throw std::logic_error("tape already has bound parameters");
  std::vector<Tensor> out;
  out.reserve(layout.block_count());
  for (int i = 0; i < layout.block_count(); ++i) {
    const auto& b = layout.block(i);
    Node n;
    n.param_offset = layout.offset(i);
    n.value = Eigen::Map<const Matrix>(values.data() + layout.offset(i), b.rows, b.cols);
    out.push_back(push(std::move(n)));
  }
  param_size_ = layout.size();
  return out;
}

std::vector<Tensor> Tape::bind_constant(const ParameterLayout& layout,
                                        std::span<const double> values) {
  if (static_cast<int>(values.size()) != layout.size()) {
    throw std::invalid_argument("parameter vector does not match layout size");
  }
  std::vector<Tensor> out;
  out.reserve(layout.block_count());
  for (int i = 0; i < layout.block_count(); ++i) {
    const auto& b = layout.block(i);
    out.push_back(constant(Eigen::Map<const Matrix>(values.data() + layout.offset(i), b.rows, b.cols)));
  }
  return out;
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  const int ia = check(a), ib = check(b);
  const Matrix& A = nodes_[ia].value;
  const Matrix& B = nodes_[ib].value;
  if (A.cols() != B.rows()) throw std::invalid_argument("matmul: inner dimensions differ");
  Node n;
  n.op = Op::MatMul;
  n.a = ia;
  n.b = ib;
  n.value.noalias() = A * B;
  return push(std::move(n));
}

Tensor Tape::add_bias(const Tensor& a, const Tensor& bias) {
  const int ia = check(a), ib = check(bias);
  const Matrix& A = nodes_[ia].value;
  const Matrix& B = nodes_[ib].value;
  if (B.cols() != 1 || B.rows() != A.rows()) throw std::invalid_argument("add_bias: bias shape");
  Node n;
  n.op = Op::AddBias;
  n.a = ia;
  n.b = ib;
  n.value = A.colwise() + B.col(0);
  return push(std::move(n));
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  const int ia = check(a), ib = check(b);
  const Matrix& A = nodes_[ia].value;
  const Matrix& B = nodes_[ib].value;
  check_binary(A, B, "add");
  Node n;
  n.op = Op::Add;
  n.a = ia;
  n.b = ib;
  if (is_scalar(A) && !is_scalar(B)) {
    n.value = B.array() + A(0, 0);
  } else if (is_scalar(B) && !is_scalar(A)) {
    n.value = A.array() + B(0, 0);
  } else {
    n.value = A + B;
  }
  return push(std::move(n));
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
  const int ia = check(a), ib = check(b);
  const Matrix& A = nodes_[ia].value;
  const Matrix& B = nodes_[ib].value;
  check_binary(A, B, "sub");
  Node n;
  n.op = Op::Sub;
  n.a = ia;
  n.b = ib;
  if (is_scalar(A) && !is_scalar(B)) {
    n.value = (-B.array() + A(0, 0)).matrix();
  } else if (is_scalar(B) && !is_scalar(A)) {
    n.value = A.array() - B(0, 0);
  } else {
    n.value = A - B;
  }
  return push(std::move(n));
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  const int ia = check(a), ib = check(b);
  const Matrix& A = nodes_[ia].value;
  const Matrix& B = nodes_[ib].value;
  check_binary(A, B, "mul");
  Node n;
  n.op = Op::Mul;
  n.a = ia;
  n.b = ib;
  if (is_scalar(A) && !is_scalar(B)) {
    n.value = B * A(0, 0);
  } else if (is_scalar(B) && !is_scalar(A)) {
    n.value = A * B(0, 0);
  } else {
    n.value = A.cwiseProduct(B);
  }
  return push(std::move(n));
}

Tensor Tape::scale(const Tensor& a, double c) {
  Node n;
  n.op = Op::Scale;
  n.a = check(a);
  n.c = c;
  n.value = nodes_[n.a].value * c;
  return push(std::move(n));
}

Tensor Tape::shift(const Tensor& a, double c) {
  Node n;
  n.op = Op::Shift;
  n.a = check(a);
  n.c = c;
  n.value = nodes_[n.a].value.array() + c;
  return push(std::move(n));
}

Tensor Tape::unary(Op op, const Tensor& a) {
  Node n;
  n.op = op;
  n.a = check(a);
  const Matrix& A = nodes_[n.a].value;
  switch (op) {
    case Op::Tanh: n.value = A.array().tanh(); break;
    case Op::Softplus: n.value = A.unaryExpr([](double x) { return softplus_value(x); }); break;
    case Op::Sigmoid: n.value = A.unaryExpr([](double x) { return sigmoid_value(x); }); break;
    case Op::Relu: n.value = A.cwiseMax(0.0); break;
    case Op::Step: n.value = A.unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; }); break;
    case Op::Square: n.value = A.array().square(); break;
    default: throw UnsupportedPrimitive(std::string(primitive_name(op)) + " (as unary)");
  }
  return push(std::move(n));
}

Tensor Tape::sum(const Tensor& a) {
  Node n;
  n.op = Op::Sum;
  n.a = check(a);
  n.value = Matrix::Constant(1, 1, nodes_[n.a].value.sum());
  return push(std::move(n));
}

Tensor Tape::hconcat(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("hconcat: no inputs");
  Node n;
  n.op = Op::HConcat;
  Eigen::Index rows = -1, cols = 0;
  for (const auto& p : parts) {
    const int id = check(p);
    const Matrix& v = nodes_[id].value;
    if (rows >= 0 && v.rows() != rows) throw std::invalid_argument("hconcat: row mismatch");
    rows = v.rows();
    cols += v.cols();
    n.parts.push_back(id);
  }
  n.value.resize(rows, cols);
  Eigen::Index at = 0;
  for (int id : n.parts) {
    const Matrix& v = nodes_[id].value;
    n.value.middleCols(at, v.cols()) = v;
    at += v.cols();
  }
  return push(std::move(n));
}

Tensor Tape::vconcat(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("vconcat: no inputs");
  Node n;
  n.op = Op::VConcat;
  Eigen::Index rows = 0, cols = -1;
  for (const auto& p : parts) {
    const int id = check(p);
    const Matrix& v = nodes_[id].value;
    if (cols >= 0 && v.cols() != cols) throw std::invalid_argument("vconcat: column mismatch");
    cols = v.cols();
    rows += v.rows();
    n.parts.push_back(id);
  }
  n.value.resize(rows, cols);
  Eigen::Index at = 0;
  for (int id : n.parts) {
    const Matrix& v = nodes_[id].value;
    n.value.middleRows(at, v.rows()) = v;
    at += v.rows();
  }
  return push(std::move(n));
}

std::vector<double> Tape::backward(const Tensor& root) {
  const int r = check(root);
  if (!is_scalar(nodes_[r].value)) throw std::invalid_argument("backward: root must be 1x1");
  std::vector<double> grad(static_cast<std::size_t>(param_size_), 0.0);
  std::vector<Matrix> adj(static_cast<std::size_t>(r + 1));
  std::vector<char> seen(static_cast<std::size_t>(r + 1), 0);
  adj[r] = Matrix::Ones(1, 1);
  seen[r] = 1;

  auto push_adj = [&](int id, const Matrix& g) {
    if (!nodes_[id].live) return;
    bool s = seen[id];
    accumulate(adj[id], s, nodes_[id].value, g);
    seen[id] = 1;
  };

  for (int i = r; i >= 0; --i) {
    if (!seen[i]) continue;
    const Node& n = nodes_[i];
    const Matrix& g = adj[i];
    switch (n.op) {
      case Op::Leaf:
        if (n.param_offset >= 0) {
          Eigen::Map<Matrix>(grad.data() + n.param_offset, n.value.rows(), n.value.cols()) += g;
        }
        break;
      case Op::MatMul:
        push_adj(n.a, g * nodes_[n.b].value.transpose());
        push_adj(n.b, nodes_[n.a].value.transpose() * g);
        break;
      case Op::AddBias:
        push_adj(n.a, g);
        push_adj(n.b, g.rowwise().sum());
        break;
      case Op::Add:
        push_adj(n.a, g);
        push_adj(n.b, g);
        break;
      case Op::Sub:
        push_adj(n.a, g);
        push_adj(n.b, -g);
        break;
      case Op::Mul: {
        const Matrix& A = nodes_[n.a].value;
        const Matrix& B = nodes_[n.b].value;
        if (is_scalar(B) && !is_scalar(A)) {
          push_adj(n.a, g * B(0, 0));
          push_adj(n.b, Matrix::Constant(1, 1, g.cwiseProduct(A).sum()));
        } else if (is_scalar(A) && !is_scalar(B)) {
          push_adj(n.a, Matrix::Constant(1, 1, g.cwiseProduct(B).sum()));
          push_adj(n.b, g * A(0, 0));
        } else {
          push_adj(n.a, g.cwiseProduct(B));
          push_adj(n.b, g.cwiseProduct(A));
        }
        break;
      }
      case Op::Scale: push_adj(n.a, g * n.c); break;
      case Op::Shift: push_adj(n.a, g); break;
      case Op::Tanh:
        push_adj(n.a, (g.array() * (1.0 - n.value.array().square())).matrix());
        break;
      case Op::Softplus:
        push_adj(n.a, g.cwiseProduct(nodes_[n.a].value.unaryExpr(
                          [](double x) { return sigmoid_value(x); })));
        break;
      case Op::Sigmoid:
        push_adj(n.a, (g.array() * n.value.array() * (1.0 - n.value.array())).matrix());
        break;
      case Op::Relu:
        // subgradient 0 at the kink
        push_adj(n.a, g.cwiseProduct(nodes_[n.a].value.unaryExpr(
                          [](double x) { return x > 0.0 ? 1.0 : 0.0; })));
        break;
      case Op::Step: break;
      case Op::Square:
        push_adj(n.a, (2.0 * g.array() * nodes_[n.a].value.array()).matrix());
        break;
      case Op::Sum:
        push_adj(n.a, Matrix::Constant(nodes_[n.a].value.rows(), nodes_[n.a].value.cols(), g(0, 0)));
        break;
      case Op::HConcat: {
        Eigen::Index at = 0;
        for (int id : n.parts) {
          const auto c = nodes_[id].value.cols();
          push_adj(id, g.middleCols(at, c));
          at += c;
        }
        break;
      }
      case Op::VConcat: {
        Eigen::Index at = 0;
        for (int id : n.parts) {
          const auto rr = nodes_[id].value.rows();
          push_adj(id, g.middleRows(at, rr));
          at += rr;
        }
        break;
      }
    }
    adj[i] = Matrix();
  }
  return grad;
}

Tensor operator+(const Tensor& a, const Tensor& b) { return a.tape()->add(a, b); }
Tensor operator-(const Tensor& a, const Tensor& b) { return a.tape()->sub(a, b); }
Tensor operator*(const Tensor& a, const Tensor& b) { return a.tape()->mul(a, b); }
Tensor operator+(const Tensor& a, double c) { return a.tape()->shift(a, c); }
Tensor operator+(double c, const Tensor& a) { return a.tape()->shift(a, c); }
Tensor operator-(const Tensor& a, double c) { return a.tape()->shift(a, -c); }
Tensor operator-(double c, const Tensor& a) { return a.tape()->shift(a.tape()->scale(a, -1.0), c); }
Tensor operator*(const Tensor& a, double c) { return a.tape()->scale(a, c); }
Tensor operator*(double c, const Tensor& a) { return a.tape()->scale(a, c); }
Tensor operator-(const Tensor& a) { return a.tape()->scale(a, -1.0); }

Tensor matmul(const Tensor& a, const Tensor& b) { return a.tape()->matmul(a, b); }
Tensor add_bias(const Tensor& a, const Tensor& bias) { return a.tape()->add_bias(a, bias); }
Tensor tanh(const Tensor& a) { return a.tape()->unary(Op::Tanh, a); }
Tensor softplus(const Tensor& a) { return a.tape()->unary(Op::Softplus, a); }
Tensor sigmoid(const Tensor& a) { return a.tape()->unary(Op::Sigmoid, a); }
Tensor relu(const Tensor& a) { return a.tape()->unary(Op::Relu, a); }
Tensor step(const Tensor& a) { return a.tape()->unary(Op::Step, a); }
Tensor square(const Tensor& a) { return a.tape()->unary(Op::Square, a); }
Tensor sum(const Tensor& a) { return a.tape()->sum(a); }
Tensor ones_like(const Tensor& a) { return a.tape()->constant_like(a, 1.0); }

}  // namespace tsr::ad
