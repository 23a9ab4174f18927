#include "dualsource/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace dualsource::nnc {

void Tape::clear() { nodes_.clear(); }

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Matrix& Tape::val(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.ext_value ? *n.ext_value : n.val;
}

const Matrix& Tape::value(Var v) const {
  if (v.id >= nodes_.size()) throw std::out_of_range("Tape: unknown node");
  return val(v.id);
}

Var Tape::constant(Matrix value) {
  Node n = node(Op::constant);
  n.val = std::move(value);
  return push(std::move(n));
}

Var Tape::constant(double x, Eigen::Index rows) { return constant(Matrix::Constant(rows, 1, x)); }

Var Tape::parameter(const Matrix* value, Matrix* grad) {
  if (!value) throw std::invalid_argument("Tape: parameter without storage");
  if (grad && (grad->rows() != value->rows() || grad->cols() != value->cols()))
    throw std::invalid_argument("Tape: gradient buffer shape mismatch");
  Node n = node(Op::parameter);
  n.ext_value = value;
  n.ext_grad = grad;
  return push(std::move(n));
}

Var Tape::affine(Var x, Var W, Var b) {
  const Matrix& X = value(x);
  const Matrix& Wm = value(W);
  const Matrix& bm = value(b);
  if (X.cols() != Wm.cols()) throw std::invalid_argument("Tape: affine input width mismatch");
  if (bm.rows() != 1 || bm.cols() != Wm.rows())
    throw std::invalid_argument("Tape: affine bias shape mismatch");
  Node n = node(Op::affine, x.id, W.id, b.id);
  n.val.noalias() = X * Wm.transpose();
  n.val.rowwise() += bm.row(0);
  return push(std::move(n));
}

Var Tape::affine(Var x, Var W) {
  const Matrix& X = value(x);
  const Matrix& Wm = value(W);
  if (X.cols() != Wm.cols()) throw std::invalid_argument("Tape: affine input width mismatch");
  Node n = node(Op::affine, x.id, W.id);
  n.val.noalias() = X * Wm.transpose();
  return push(std::move(n));
}

Var Tape::celu(Var x, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("Tape: CELU alpha must be > 0");
  Node n = node(Op::celu, x.id);
  n.s = alpha;
  n.val = celu_apply(value(x), alpha);
  return push(std::move(n));
}

Var Tape::relu(Var x) {
  Node n = node(Op::relu, x.id);
  n.val = value(x).cwiseMax(0.0);
  return push(std::move(n));
}

Var Tape::frac_decouple(Var y) {
  Node n = node(Op::frac, y.id);
  n.val = value(y).cwiseMax(0.0);
  if (!surrogate_) n.val = n.val.array().floor().matrix();
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.rows() != B.rows() || A.cols() != B.cols()) throw std::invalid_argument("Tape: add shape");
  Node n = node(Op::add, a.id, b.id);
  n.val = A + B;
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  const Matrix& A = value(a);
  const Matrix& B = value(b);
  if (A.rows() != B.rows() || A.cols() != B.cols()) throw std::invalid_argument("Tape: sub shape");
  Node n = node(Op::sub, a.id, b.id);
  n.val = A - B;
  return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
  Node n = node(Op::scale, a.id);
  n.s = s;
  n.val = s * value(a);
  return push(std::move(n));
}

Var Tape::column(Var x, Eigen::Index j) {
  const Matrix& X = value(x);
  if (j < 0 || j >= X.cols()) throw std::out_of_range("Tape: column index");
  Node n = node(Op::column, x.id);
  n.j = j;
  n.val = X.col(j);
  return push(std::move(n));
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("Tape: empty concat");
  const Eigen::Index rows = value(parts[0]).rows();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    if (value(p).rows() != rows) throw std::invalid_argument("Tape: concat row mismatch");
    cols += value(p).cols();
  }
  Node n = node(Op::concat);
  n.val.resize(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    const Matrix& P = value(p);
    n.val.middleCols(at, P.cols()) = P;
    at += P.cols();
    n.parts.push_back(p.id);
  }
  return push(std::move(n));
}

Var Tape::broadcast(Var scalar, Eigen::Index rows) {
  const Matrix& S = value(scalar);
  if (S.rows() != 1 || S.cols() != 1) throw std::invalid_argument("Tape: broadcast needs 1x1");
  Node n = node(Op::broadcast, scalar.id);
  n.val = Matrix::Constant(rows, 1, S(0, 0));
  return push(std::move(n));
}

Var Tape::mean(Var x) {
  Node n = node(Op::mean, x.id);
  n.val = Matrix::Constant(1, 1, value(x).mean());
  return push(std::move(n));
}

Var Tape::sum(Var x) {
  Node n = node(Op::sum, x.id);
  n.val = Matrix::Constant(1, 1, value(x).sum());
  return push(std::move(n));
}

Matrix& Tape::grad_of(std::vector<Matrix>& grads, std::uint32_t id) const {
  Matrix& g = grads[id];
  if (g.size() == 0) g = Matrix::Zero(val(id).rows(), val(id).cols());
  return g;
}

void Tape::backward(Var out) {
  if (out.id >= nodes_.size()) throw std::out_of_range("Tape: unknown node");
  if (val(out.id).size() != 1) throw std::invalid_argument("Tape: backward needs a 1x1 output");
  std::vector<Matrix> grads(nodes_.size());
  grads[out.id] = Matrix::Constant(1, 1, 1.0);

  for (std::uint32_t i = out.id + 1; i-- > 0;) {
    if (grads[i].size() == 0) continue;
    const Node& n = nodes_[i];
    Matrix g = std::move(grads[i]);
    grads[i] = Matrix();
    switch (n.op) {
      case Op::constant:
        break;
      case Op::parameter:
        if (n.ext_grad) *n.ext_grad += g;
        break;
      case Op::affine: {
        const Matrix& X = val(n.a);
        const Matrix& W = val(n.b);
        if (nodes_[n.a].op != Op::constant) grad_of(grads, n.a).noalias() += g * W;
        grad_of(grads, n.b).noalias() += g.transpose() * X;
        if (n.c != none) grad_of(grads, n.c) += g.colwise().sum();
        break;
      }
      case Op::celu: {
        // For x <= 0 the derivative exp(x / alpha) equals 1 + out / alpha.
        const auto x = val(n.a).array();
        const auto y = n.val.array();
        grad_of(grads, n.a).array() += (x > 0.0).select(g.array(), g.array() * (1.0 + y / n.s));
        break;
      }
      case Op::relu:
      case Op::frac: {
        // Subgradient 0 at the kink.
        const Matrix& X = val(n.a);
        grad_of(grads, n.a).array() += (X.array() > 0.0).select(g.array(), 0.0);
        break;
      }
      case Op::add:
        grad_of(grads, n.a) += g;
        grad_of(grads, n.b) += g;
        break;
      case Op::sub:
        grad_of(grads, n.a) += g;
        grad_of(grads, n.b) -= g;
        break;
      case Op::scale:
        grad_of(grads, n.a) += n.s * g;
        break;
      case Op::column:
        grad_of(grads, n.a).col(n.j) += g;
        break;
      case Op::concat: {
        Eigen::Index at = 0;
        for (std::uint32_t p : n.parts) {
          Matrix& gp = grad_of(grads, p);
          gp += g.middleCols(at, gp.cols());
          at += gp.cols();
        }
        break;
      }
      case Op::broadcast:
        grad_of(grads, n.a)(0, 0) += g.sum();
        break;
      case Op::mean: {
        Matrix& ga = grad_of(grads, n.a);
        ga.array() += g(0, 0) / static_cast<double>(ga.size());
        break;
      }
      case Op::sum:
        grad_of(grads, n.a).array() += g(0, 0);
        break;
    }
  }
}

}  // namespace dualsource::nnc
