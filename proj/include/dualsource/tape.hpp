#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace dualsource::nnc {

/// Batch-major matrices: one row per trajectory, one column per feature.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Elementwise CELU, vectorized: x for x > 0, alpha (exp(x / alpha) - 1)
/// otherwise. Shared by the tape and the off-tape forward pass so both give
/// identical values.
inline Matrix celu_apply(const Matrix& x, double alpha) {
  const auto a = x.array();
  return (a > 0.0).select(a, alpha * ((a.min(0.0) / alpha).exp() - 1.0)).matrix();
}

/// Handle to a node on a Tape.
struct Var {
  std::uint32_t id = 0;
};

/// Reverse-mode autodiff over whole matrices. Nodes are appended in
/// evaluation order, which is therefore a topological order; backward() walks
/// it once in reverse.
///
/// In surrogate mode fractional decoupling forwards [y]^+ instead of its
/// floor, which makes the recorded function differentiable everywhere except
/// at kinks and lets finite differences check the straight-through gradient.
class Tape {
public:
  explicit Tape(bool surrogate = false) : surrogate_(surrogate) {}

  bool surrogate() const { return surrogate_; }
  void clear();
  std::size_t size() const { return nodes_.size(); }

  Var constant(Matrix value);
  /// Column of `rows` copies of x.
  Var constant(double x, Eigen::Index rows);
  /// Leaf bound to external storage; backward() adds into *grad, which must
  /// have the shape of *value. Both must outlive the tape contents.
  Var parameter(const Matrix* value, Matrix* grad);

  /// x W^T + b with x: n x in, W: out x in, b: 1 x out.
  Var affine(Var x, Var W, Var b);
  /// Bias-free affine map.
  Var affine(Var x, Var W);
  Var celu(Var x, double alpha);
  Var relu(Var x);
  /// Forward floor([y]^+), backward as [y]^+ (straight-through).
  Var frac_decouple(Var y);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var scale(Var a, double s);
  Var column(Var x, Eigen::Index j);
  Var concat_cols(const std::vector<Var>& parts);
  /// 1 x 1 node repeated into a rows x 1 column.
  Var broadcast(Var scalar, Eigen::Index rows);
  /// Mean over all entries, as 1 x 1.
  Var mean(Var x);
  Var sum(Var x);

  const Matrix& value(Var v) const;
  double scalar(Var v) const { return value(v)(0, 0); }

  /// Seeds d(out)/d(out) = 1 (out must be 1 x 1) and accumulates gradients
  /// into parameter leaves. Gradients of inner nodes are discarded.
  void backward(Var out);

private:
  enum class Op : std::uint8_t {
    constant, parameter, affine, celu, relu, frac, add, sub, scale, column, concat, broadcast,
    mean, sum
  };
  static constexpr std::uint32_t none = UINT32_MAX;

  struct Node {
    Op op = Op::constant;
    std::uint32_t a = none, b = none, c = none;
    double s = 0.0;
    Eigen::Index j = 0;
    std::vector<std::uint32_t> parts;
    Matrix val;
    const Matrix* ext_value = nullptr;
    Matrix* ext_grad = nullptr;
  };

  static Node node(Op op, std::uint32_t a = none, std::uint32_t b = none, std::uint32_t c = none) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.c = c;
    return n;
  }
  Var push(Node n);
  const Matrix& val(std::uint32_t id) const;
  Matrix& grad_of(std::vector<Matrix>& grads, std::uint32_t id) const;

  bool surrogate_;
  std::vector<Node> nodes_;
};

}  // namespace dualsource::nnc
