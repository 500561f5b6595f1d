#include "bsde/tape.hpp"

#include <cmath>

namespace bsde {

namespace kn = kernels;

const Tensor& Var::val() const { return tape->value(idx); }

Var Tape::push(Node n) {
  if (checked_) require_finite(n.value, "tape node");
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::constant(Tensor v) {
  Node n;
  n.op = Op::constant;
  n.value = std::move(v);
  return push(std::move(n));
}

Var Tape::leaf(Tensor v, std::string name) {
  Node n;
  n.op = Op::leaf;
  n.value = std::move(v);
  Var out = push(std::move(n));
  leaves_.push_back(out.idx);
  leaf_names_.push_back(std::move(name));
  return out;
}

namespace {

kn::Bcast bcast_of(const Tensor& a, const Tensor& b) {
  if (a.same_shape(b)) return kn::Bcast::same;
  if (b.rows == 1 && b.cols == 1) return kn::Bcast::scalar;
  if (b.rows == 1 && b.cols == a.cols) return kn::Bcast::row;
  if (b.cols == 1 && b.rows == a.rows) return kn::Bcast::col;
  throw std::invalid_argument("operand " + shape_str(b) + " does not broadcast against " +
                              shape_str(a));
}

void check_same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw std::logic_error("operands recorded on different tapes");
}

Var binary(Op op, kn::BinOp k, Var a, Var b) {
  check_same_tape(a, b);
  Node n;
  n.op = op;
  n.a = a.idx;
  n.b = b.idx;
  n.bc = bcast_of(a.val(), b.val());
  n.value = kn::ewise(k, a.val(), b.val(), n.bc);
  return a.tape->push(std::move(n));
}

Var unary(Op op, kn::UnOp k, Var a) {
  Node n;
  n.op = op;
  n.a = a.idx;
  n.value = kn::map(k, a.val());
  return a.tape->push(std::move(n));
}

/// Reduce a full-shape gradient back to the broadcast operand's shape.
Tensor reduce_to(const Tensor& g, kn::Bcast bc) {
  switch (bc) {
    case kn::Bcast::same: return g;
    case kn::Bcast::row: return kn::colsum(g);
    case kn::Bcast::col: return kn::rowsum(g);
    case kn::Bcast::scalar: return Tensor::scalar(kn::sum_all(g));
  }
  return g;
}

/// Expand a reduced tensor to (rows, cols) by broadcasting.
Tensor expand_to(const Tensor& g, std::int64_t rows, std::int64_t cols, kn::Bcast bc) {
  return kn::ewise(kn::BinOp::add, Tensor::zeros(rows, cols), g, bc);
}

}  // namespace

Var matmul(Var a, Var b) {
  check_same_tape(a, b);
  Node n;
  n.op = Op::matmul;
  n.a = a.idx;
  n.b = b.idx;
  n.value = kn::matmul(a.val(), b.val());
  return a.tape->push(std::move(n));
}

Var add(Var a, Var b) { return binary(Op::add, kn::BinOp::add, a, b); }
Var sub(Var a, Var b) { return binary(Op::sub, kn::BinOp::sub, a, b); }
Var mul(Var a, Var b) { return binary(Op::mul, kn::BinOp::mul, a, b); }
Var div(Var a, Var b) { return binary(Op::div, kn::BinOp::div, a, b); }
Var relu(Var a) { return unary(Op::relu, kn::UnOp::relu, a); }
Var square(Var a) { return unary(Op::square, kn::UnOp::square, a); }
Var sqrt_v(Var a) { return unary(Op::sqrt_op, kn::UnOp::sqrt_fn, a); }
Var exp_v(Var a) { return unary(Op::exp_op, kn::UnOp::exp_fn, a); }
Var sin_v(Var a) { return unary(Op::sin_op, kn::UnOp::sin_fn, a); }
Var cos_v(Var a) { return unary(Op::cos_op, kn::UnOp::cos_fn, a); }
Var neg(Var a) { return unary(Op::neg, kn::UnOp::neg, a); }

Var affine(Var a, double mul, double add) {
  Node n;
  n.op = Op::affine;
  n.a = a.idx;
  n.c0 = mul;
  n.c1 = add;
  n.value = kn::affine(a.val(), mul, add);
  return a.tape->push(std::move(n));
}

Var concat_cols(Var a, Var b) {
  check_same_tape(a, b);
  Node n;
  n.op = Op::concat_cols;
  n.a = a.idx;
  n.b = b.idx;
  n.value = kn::concat_cols(a.val(), b.val());
  return a.tape->push(std::move(n));
}

Var rowsum(Var a) {
  Node n;
  n.op = Op::rowsum;
  n.a = a.idx;
  n.value = kn::rowsum(a.val());
  return a.tape->push(std::move(n));
}

Var colmean(Var a) {
  Node n;
  n.op = Op::colmean;
  n.a = a.idx;
  n.value = kn::affine(kn::colsum(a.val()), 1.0 / static_cast<double>(a.val().rows), 0.0);
  return a.tape->push(std::move(n));
}

Var mean_all(Var a) {
  Node n;
  n.op = Op::mean_all;
  n.a = a.idx;
  n.value = Tensor::scalar(kn::sum_all(a.val()) / static_cast<double>(a.val().size()));
  return a.tape->push(std::move(n));
}

GradientMap Tape::backward(Var root) const {
  if (root.tape != this || root.idx < 0 || root.idx >= static_cast<int>(nodes_.size()))
    throw std::logic_error("backward: root not on this tape");
  const Tensor& rv = nodes_[root.idx].value;
  if (rv.rows != 1 || rv.cols != 1) throw std::logic_error("backward: root is not a scalar");

  std::vector<Tensor> grad(nodes_.size());
  auto has_grad = [&](int i) { return grad[i].rows != 0; };
  auto add_grad = [&](int i, Tensor&& g) {
    if (!has_grad(i))
      grad[i] = std::move(g);
    else
      kn::accumulate(grad[i], g);
  };

  grad[root.idx] = Tensor::scalar(1.0);

  for (int i = root.idx; i >= 0; --i) {
    if (!has_grad(i)) continue;
    const Node& n = nodes_[i];
    const Tensor& g = grad[i];
    switch (n.op) {
      case Op::constant:
      case Op::leaf: break;
      case Op::matmul: {
        add_grad(n.a, kn::matmul_nt(g, nodes_[n.b].value));
        add_grad(n.b, kn::matmul_tn(nodes_[n.a].value, g));
        break;
      }
      case Op::add: {
        add_grad(n.a, Tensor(g));
        add_grad(n.b, reduce_to(g, n.bc));
        break;
      }
      case Op::sub: {
        add_grad(n.a, Tensor(g));
        add_grad(n.b, kn::affine(reduce_to(g, n.bc), -1.0, 0.0));
        break;
      }
      case Op::mul: {
        add_grad(n.a, kn::ewise(kn::BinOp::mul, g, nodes_[n.b].value, n.bc));
        add_grad(n.b, reduce_to(kn::ewise(kn::BinOp::mul, g, nodes_[n.a].value, kn::Bcast::same),
                                n.bc));
        break;
      }
      case Op::div: {
        // out = a / b: da = g / b, db = -g * out / b
        add_grad(n.a, kn::ewise(kn::BinOp::div, g, nodes_[n.b].value, n.bc));
        Tensor t = kn::ewise(kn::BinOp::mul, g, n.value, kn::Bcast::same);
        t = kn::ewise(kn::BinOp::div, t, nodes_[n.b].value, n.bc);
        add_grad(n.b, kn::affine(reduce_to(t, n.bc), -1.0, 0.0));
        break;
      }
      case Op::relu: {
        add_grad(n.a, kn::ewise(kn::BinOp::mul, g, kn::map(kn::UnOp::gt0, nodes_[n.a].value),
                                kn::Bcast::same));
        break;
      }
      case Op::square: {
        add_grad(n.a, kn::ewise(kn::BinOp::mul, g, kn::affine(nodes_[n.a].value, 2.0, 0.0),
                                kn::Bcast::same));
        break;
      }
      case Op::sqrt_op: {
        add_grad(n.a, kn::ewise(kn::BinOp::div, kn::affine(g, 0.5, 0.0), n.value, kn::Bcast::same));
        break;
      }
      case Op::exp_op: {
        add_grad(n.a, kn::ewise(kn::BinOp::mul, g, n.value, kn::Bcast::same));
        break;
      }
      case Op::sin_op: {
        add_grad(n.a, kn::ewise(kn::BinOp::mul, g, kn::map(kn::UnOp::cos_fn, nodes_[n.a].value),
                                kn::Bcast::same));
        break;
      }
      case Op::cos_op: {
        Tensor t = kn::ewise(kn::BinOp::mul, g, kn::map(kn::UnOp::sin_fn, nodes_[n.a].value),
                             kn::Bcast::same);
        add_grad(n.a, kn::affine(t, -1.0, 0.0));
        break;
      }
      case Op::neg: {
        add_grad(n.a, kn::affine(g, -1.0, 0.0));
        break;
      }
      case Op::affine: {
        add_grad(n.a, kn::affine(g, n.c0, 0.0));
        break;
      }
      case Op::concat_cols: {
        const std::int64_t ca = nodes_[n.a].value.cols;
        const std::int64_t cb = nodes_[n.b].value.cols;
        add_grad(n.a, kn::slice_cols(g, 0, ca));
        add_grad(n.b, kn::slice_cols(g, ca, cb));
        break;
      }
      case Op::rowsum: {
        const Tensor& av = nodes_[n.a].value;
        add_grad(n.a, expand_to(g, av.rows, av.cols, kn::Bcast::col));
        break;
      }
      case Op::colmean: {
        const Tensor& av = nodes_[n.a].value;
        add_grad(n.a, expand_to(kn::affine(g, 1.0 / static_cast<double>(av.rows), 0.0), av.rows,
                                av.cols, kn::Bcast::row));
        break;
      }
      case Op::mean_all: {
        const Tensor& av = nodes_[n.a].value;
        add_grad(n.a, Tensor::full(av.rows, av.cols,
                                   g.value() / static_cast<double>(av.size())));
        break;
      }
    }
    if (i != root.idx && nodes_[i].op != Op::leaf) grad[i] = Tensor();  // free as we go
  }

  GradientMap out;
  out.by_leaf.reserve(leaves_.size());
  out.names = leaf_names_;
  for (int li : leaves_) {
    if (has_grad(li))
      out.by_leaf.push_back(std::move(grad[li]));
    else
      out.by_leaf.push_back(Tensor::zeros(nodes_[li].value.rows, nodes_[li].value.cols));
  }
  return out;
}

double finite_diff_check(const std::function<double(const std::vector<Tensor>&)>& f,
                         const std::vector<Tensor>& params, const std::vector<Tensor>& grads,
                         double eps) {
  if (eps <= 0.0) throw std::invalid_argument("finite_diff_check: eps must be positive");
  if (params.size() != grads.size())
    throw std::invalid_argument("finite_diff_check: params/grads size mismatch");
  std::vector<Tensor> p = params;
  double worst = 0.0;
  for (std::size_t t = 0; t < p.size(); ++t) {
    for (std::size_t i = 0; i < p[t].data.size(); ++i) {
      const double saved = p[t].data[i];
      p[t].data[i] = saved + eps;
      const double fp = f(p);
      p[t].data[i] = saved - eps;
      const double fm = f(p);
      p[t].data[i] = saved;
      const double fd = (fp - fm) / (2.0 * eps);
      const double gi = grads[t].data[i];
      const double rel = std::abs(fd - gi) / (std::abs(gi) + 1e-12);
      if (rel > worst) worst = rel;
    }
  }
  return worst;
}

}  // namespace bsde
