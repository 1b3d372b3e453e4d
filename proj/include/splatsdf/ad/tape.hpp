#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "splatsdf/core/types.hpp"

namespace splatsdf::ad {

// Rank-2 tensor: shape is (rows, cols), storage row-major in the logical
// sense used by reshape (Eigen holds it column-major internally).
template <class S>
using Tensor = MatX<S>;

enum class Op : std::uint8_t {
  kLeaf,
  kConst,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kScale,       // a * c + d (affine by constants)
  kMatmul,
  kAddRow,      // matrix + row vector broadcast
  kColMul,      // matrix * column vector broadcast
  kExp,
  kLog,
  kSigmoid,
  kSoftplus,    // aux = beta
  kRelu,
  kSin,
  kCos,
  kAbs,
  kSqrt,
  kClampMin,    // aux = min value
  kSum,         // -> 1x1
  kMean,        // -> 1x1
  kRowSum,      // [r,c] -> [r,1]
  kRowNorm,     // [r,c] -> [r,1], L2 per row
  kHCat,
  kSliceCols,   // iaux0 = begin, iaux1 = count
  kReshape,     // row-major reshape
  kCumprodExclRow,  // y[r,j] = prod_{k<j} x[r,k]
  kCumsumExclRow,   // y[r,j] = sum_{k<j} x[r,k]
  kQuatToRot,   // [n,4] -> [n,9]
};

// Reverse-mode tape over dense matrices. Ops append nodes in topological
// order; backward() walks them once in reverse. Gradients accumulate only
// into subtrees reachable from differentiable leaves.
template <class S>
class Tape {
 public:
  using Mat = Tensor<S>;

  struct Var {
    std::int32_t id = -1;
    bool valid() const { return id >= 0; }
  };

  Var input(Mat v) { return push(Op::kLeaf, {}, {}, std::move(v), true); }
  Var constant(Mat v) { return push(Op::kConst, {}, {}, std::move(v), false); }

  Var add(Var a, Var b) {
    check_same_shape(a, b, "add");
    return push(Op::kAdd, a, b, val(a) + val(b));
  }
  Var sub(Var a, Var b) {
    check_same_shape(a, b, "sub");
    return push(Op::kSub, a, b, val(a) - val(b));
  }
  Var mul(Var a, Var b) {
    check_same_shape(a, b, "mul");
    return push(Op::kMul, a, b, val(a).cwiseProduct(val(b)));
  }
  Var div(Var a, Var b) {
    check_same_shape(a, b, "div");
    return push(Op::kDiv, a, b, val(a).cwiseQuotient(val(b)));
  }
  // c * a + d
  Var scale(Var a, S c, S d = S(0)) {
    Node n = make(Op::kScale, a, {}, (val(a).array() * c + d).matrix());
    n.aux0 = c;
    return push_node(std::move(n));
  }
  Var matmul(Var a, Var b) {
    if (val(a).cols() != val(b).rows()) shape_error("matmul", a, b);
    return push(Op::kMatmul, a, b, val(a) * val(b));
  }
  Var add_row(Var m, Var row) {
    if (val(row).rows() != 1 || val(row).cols() != val(m).cols()) shape_error("add_row", m, row);
    return push(Op::kAddRow, m, row, val(m).rowwise() + val(row).row(0));
  }
  Var colmul(Var m, Var col) {
    if (val(col).cols() != 1 || val(col).rows() != val(m).rows()) shape_error("colmul", m, col);
    return push(Op::kColMul, m, col, val(m).array().colwise() * val(col).col(0).array());
  }
  Var exp(Var a) { return push(Op::kExp, a, {}, val(a).array().exp().matrix()); }
  Var log(Var a) { return push(Op::kLog, a, {}, val(a).array().log().matrix()); }
  Var sigmoid(Var a) {
    Mat y = (S(1) / (S(1) + (-val(a).array()).exp())).matrix();
    return push(Op::kSigmoid, a, {}, std::move(y));
  }
  Var softplus(Var a, S beta = S(1)) {
    auto x = val(a).array();
    Mat y = (x.max(S(0)) + ((-(x * beta).abs()).exp().log1p()) / beta).matrix();
    Node n = make(Op::kSoftplus, a, {}, std::move(y));
    n.aux0 = beta;
    return push_node(std::move(n));
  }
  Var relu(Var a) { return push(Op::kRelu, a, {}, val(a).cwiseMax(S(0))); }
  Var sin(Var a) { return push(Op::kSin, a, {}, val(a).array().sin().matrix()); }
  Var cos(Var a) { return push(Op::kCos, a, {}, val(a).array().cos().matrix()); }
  Var abs(Var a) { return push(Op::kAbs, a, {}, val(a).array().abs().matrix()); }
  Var sqrt(Var a) { return push(Op::kSqrt, a, {}, val(a).array().sqrt().matrix()); }
  Var clamp_min(Var a, S m) {
    Node n = make(Op::kClampMin, a, {}, val(a).cwiseMax(m));
    n.aux0 = m;
    return push_node(std::move(n));
  }
  Var sum(Var a) {
    Mat y(1, 1);
    y(0, 0) = val(a).sum();
    return push(Op::kSum, a, {}, std::move(y));
  }
  Var mean(Var a) {
    Mat y(1, 1);
    y(0, 0) = val(a).mean();
    return push(Op::kMean, a, {}, std::move(y));
  }
  Var row_sum(Var a) { return push(Op::kRowSum, a, {}, val(a).rowwise().sum()); }
  Var row_norm(Var a) { return push(Op::kRowNorm, a, {}, val(a).rowwise().norm()); }
  Var hcat(Var a, Var b) {
    if (val(a).rows() != val(b).rows()) shape_error("hcat", a, b);
    Mat y(val(a).rows(), val(a).cols() + val(b).cols());
    y << val(a), val(b);
    return push(Op::kHCat, a, b, std::move(y));
  }
  Var slice_cols(Var a, Index begin, Index count) {
    if (begin < 0 || begin + count > val(a).cols()) shape_error("slice_cols", a, a);
    Node n = make(Op::kSliceCols, a, {}, val(a).middleCols(begin, count));
    n.iaux0 = begin;
    n.iaux1 = count;
    return push_node(std::move(n));
  }
  Var reshape(Var a, Index rows, Index cols) {
    const Mat& x = val(a);
    if (rows * cols != x.rows() * x.cols()) shape_error("reshape", a, a);
    Mat y(rows, cols);
    const Index sc = x.cols();
    for (Index i = 0; i < rows * cols; ++i) y(i / cols, i % cols) = x(i / sc, i % sc);
    return push(Op::kReshape, a, {}, std::move(y));
  }
  Var cumprod_exclusive_row(Var a) {
    const Mat& x = val(a);
    Mat y(x.rows(), x.cols());
    for (Index r = 0; r < x.rows(); ++r) {
      S p = S(1);
      for (Index c = 0; c < x.cols(); ++c) {
        y(r, c) = p;
        p *= x(r, c);
      }
    }
    return push(Op::kCumprodExclRow, a, {}, std::move(y));
  }
  Var cumsum_exclusive_row(Var a) {
    const Mat& x = val(a);
    Mat y(x.rows(), x.cols());
    for (Index r = 0; r < x.rows(); ++r) {
      S p = S(0);
      for (Index c = 0; c < x.cols(); ++c) {
        y(r, c) = p;
        p += x(r, c);
      }
    }
    return push(Op::kCumsumExclRow, a, {}, std::move(y));
  }
  Var quat_to_rot(Var q) {
    const Mat& x = val(q);
    if (x.cols() != 4) shape_error("quat_to_rot", q, q);
    Mat y(x.rows(), 9);
    for (Index r = 0; r < x.rows(); ++r) {
      const Mat3<S> rot = splatsdf::quat_to_rot<S>(Vec4<S>(x.row(r).transpose()));
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) y(r, 3 * i + j) = rot(i, j);
    }
    return push(Op::kQuatToRot, q, {}, std::move(y));
  }

  const Mat& value(Var v) const { return nodes_[v.id].value; }

  // Gradient of the last backward() seed w.r.t. v. Zero matrix if the seed
  // does not depend on v.
  Mat gradient(Var v) const {
    const Node& n = nodes_[v.id];
    if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  void backward(Var seed) {
    Node& out = nodes_[seed.id];
    if (out.value.rows() != 1 || out.value.cols() != 1)
      throw std::invalid_argument("backward: seed must be scalar");
    for (auto& n : nodes_) {
      if (n.requires_grad) n.grad.setZero(n.value.rows(), n.value.cols());
    }
    if (!out.requires_grad) return;
    out.grad(0, 0) = S(1);
    for (std::int32_t i = seed.id; i >= 0; --i) backprop(nodes_[i]);
  }

  void clear() { nodes_.clear(); }
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Op op = Op::kLeaf;
    std::int32_t a = -1, b = -1;
    S aux0 = S(0);
    Index iaux0 = 0, iaux1 = 0;
    Mat value;
    Mat grad;
    bool requires_grad = false;
  };

  const Mat& val(Var v) const { return nodes_[v.id].value; }

  Node make(Op op, Var a, Var b, Mat value) {
    Node n;
    n.op = op;
    n.a = a.id;
    n.b = b.id;
    n.value = std::move(value);
    n.requires_grad = (a.valid() && nodes_[a.id].requires_grad) ||
                      (b.valid() && nodes_[b.id].requires_grad);
    return n;
  }

  Var push(Op op, Var a, Var b, Mat value, bool leaf_grad = false) {
    Node n = make(op, a, b, std::move(value));
    if (op == Op::kLeaf) n.requires_grad = leaf_grad;
    return push_node(std::move(n));
  }

  Var push_node(Node n) {
    if (!n.value.allFinite())
      throw std::runtime_error("tape: non-finite value produced by op " +
                               std::to_string(int(n.op)));
    nodes_.push_back(std::move(n));
    return Var{std::int32_t(nodes_.size() - 1)};
  }

  void check_same_shape(Var a, Var b, const char* op) {
    if (val(a).rows() != val(b).rows() || val(a).cols() != val(b).cols())
      shape_error(op, a, b);
  }

  [[noreturn]] void shape_error(const char* op, Var a, Var b) {
    throw std::invalid_argument(std::string("tape: shape mismatch in ") + op + ": (" +
                                std::to_string(val(a).rows()) + "x" + std::to_string(val(a).cols()) +
                                ") vs (" + std::to_string(val(b).rows()) + "x" +
                                std::to_string(val(b).cols()) + ")");
  }

  void add_grad(std::int32_t id, const Mat& g) {
    if (id < 0) return;
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    n.grad += g;
  }

  void backprop(Node& n) {
    if (!n.requires_grad || n.grad.size() == 0) return;
    const Mat& g = n.grad;
    switch (n.op) {
      case Op::kLeaf:
      case Op::kConst:
        break;
      case Op::kAdd:
        add_grad(n.a, g);
        add_grad(n.b, g);
        break;
      case Op::kSub:
        add_grad(n.a, g);
        add_grad(n.b, -g);
        break;
      case Op::kMul:
        add_grad(n.a, g.cwiseProduct(nodes_[n.b].value));
        add_grad(n.b, g.cwiseProduct(nodes_[n.a].value));
        break;
      case Op::kDiv: {
        const Mat& bv = nodes_[n.b].value;
        add_grad(n.a, g.cwiseQuotient(bv));
        add_grad(n.b, -(g.cwiseProduct(n.value).cwiseQuotient(bv)));
        break;
      }
      case Op::kScale:
        add_grad(n.a, (g.array() * n.aux0).matrix());
        break;
      case Op::kMatmul:
        add_grad(n.a, g * nodes_[n.b].value.transpose());
        add_grad(n.b, nodes_[n.a].value.transpose() * g);
        break;
      case Op::kAddRow:
        add_grad(n.a, g);
        add_grad(n.b, g.colwise().sum());
        break;
      case Op::kColMul: {
        const Mat& col = nodes_[n.b].value;
        const Mat& m = nodes_[n.a].value;
        add_grad(n.a, (g.array().colwise() * col.col(0).array()).matrix());
        add_grad(n.b, g.cwiseProduct(m).rowwise().sum());
        break;
      }
      case Op::kExp:
        add_grad(n.a, g.cwiseProduct(n.value));
        break;
      case Op::kLog:
        add_grad(n.a, g.cwiseQuotient(nodes_[n.a].value));
        break;
      case Op::kSigmoid:
        add_grad(n.a, (g.array() * n.value.array() * (S(1) - n.value.array())).matrix());
        break;
      case Op::kSoftplus: {
        auto x = nodes_[n.a].value.array() * n.aux0;
        add_grad(n.a, (g.array() / (S(1) + (-x).exp())).matrix());
        break;
      }
      case Op::kRelu:
        add_grad(n.a, (g.array() * (nodes_[n.a].value.array() > S(0)).template cast<S>()).matrix());
        break;
      case Op::kSin:
        add_grad(n.a, g.cwiseProduct(nodes_[n.a].value.array().cos().matrix()));
        break;
      case Op::kCos:
        add_grad(n.a, -g.cwiseProduct(nodes_[n.a].value.array().sin().matrix()));
        break;
      case Op::kAbs:
        add_grad(n.a, (g.array() * nodes_[n.a].value.array().sign()).matrix());
        break;
      case Op::kSqrt:
        add_grad(n.a, (g.array() / (S(2) * n.value.array().max(S(1e-30)))).matrix());
        break;
      case Op::kClampMin:
        add_grad(n.a, (g.array() * (nodes_[n.a].value.array() > n.aux0).template cast<S>()).matrix());
        break;
      case Op::kSum:
        add_grad(n.a, Mat::Constant(nodes_[n.a].value.rows(), nodes_[n.a].value.cols(), g(0, 0)));
        break;
      case Op::kMean:
        add_grad(n.a, Mat::Constant(nodes_[n.a].value.rows(), nodes_[n.a].value.cols(),
                                    g(0, 0) / S(nodes_[n.a].value.size())));
        break;
      case Op::kRowSum:
        add_grad(n.a, g.col(0).replicate(1, nodes_[n.a].value.cols()));
        break;
      case Op::kRowNorm: {
        const Mat& x = nodes_[n.a].value;
        Mat gx = Mat::Zero(x.rows(), x.cols());
        for (Index r = 0; r < x.rows(); ++r) {
          const S nrm = n.value(r, 0);
          if (nrm > S(1e-30)) gx.row(r) = (g(r, 0) / nrm) * x.row(r);
        }
        add_grad(n.a, gx);
        break;
      }
      case Op::kHCat: {
        const Index ca = nodes_[n.a].value.cols();
        add_grad(n.a, g.leftCols(ca));
        add_grad(n.b, g.rightCols(g.cols() - ca));
        break;
      }
      case Op::kSliceCols: {
        Mat gx = Mat::Zero(nodes_[n.a].value.rows(), nodes_[n.a].value.cols());
        gx.middleCols(n.iaux0, n.iaux1) = g;
        add_grad(n.a, gx);
        break;
      }
      case Op::kReshape: {
        const Mat& x = nodes_[n.a].value;
        Mat gx(x.rows(), x.cols());
        const Index sc = x.cols(), dc = n.value.cols();
        for (Index i = 0; i < x.size(); ++i) gx(i / sc, i % sc) = g(i / dc, i % dc);
        add_grad(n.a, gx);
        break;
      }
      case Op::kCumprodExclRow: {
        // dL/dx_k = y_k * (g_{k+1} + x_{k+1} g_{k+2} + x_{k+1} x_{k+2} g_{k+3} + ...)
        const Mat& x = nodes_[n.a].value;
        Mat gx(x.rows(), x.cols());
        for (Index r = 0; r < x.rows(); ++r) {
          S q = S(0);
          for (Index c = x.cols() - 1; c >= 0; --c) {
            gx(r, c) = n.value(r, c) * q;
            q = (c > 0) ? g(r, c) + x(r, c) * q : q;
          }
        }
        add_grad(n.a, gx);
        break;
      }
      case Op::kCumsumExclRow: {
        const Mat& x = nodes_[n.a].value;
        Mat gx(x.rows(), x.cols());
        for (Index r = 0; r < x.rows(); ++r) {
          S q = S(0);
          for (Index c = x.cols() - 1; c >= 0; --c) {
            gx(r, c) = q;
            q += g(r, c);
          }
        }
        add_grad(n.a, gx);
        break;
      }
      case Op::kQuatToRot: {
        const Mat& x = nodes_[n.a].value;
        Mat gx(x.rows(), 4);
        Eigen::Matrix<S, 9, 4> jac;
        for (Index r = 0; r < x.rows(); ++r) {
          Vec4<S> q = x.row(r).transpose();
          const S nrm = q.norm();
          const Vec4<S> u = q / nrm;
          quat_to_rot_jacobian<S>(u, jac);
          Eigen::Matrix<S, 9, 1> g9 = g.row(r).transpose();
          Vec4<S> gu = jac.transpose() * g9;
          gx.row(r) = (((Eigen::Matrix<S, 4, 4>::Identity() - u * u.transpose()) / nrm) * gu)
                          .transpose();
        }
        add_grad(n.a, gx);
        break;
      }
    }
  }

  std::vector<Node> nodes_;
};

}  // namespace splatsdf::ad
