#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bsde/kernels.hpp"
#include "bsde/tensor.hpp"

namespace bsde {

/// Primitive kinds recorded on the tape.
enum class Op {
  constant,
  leaf,
  matmul,
  add,
  sub,
  mul,
  div,
  relu,
  square,
  sqrt_op,
  exp_op,
  sin_op,
  cos_op,
  neg,
  affine,  // c0 * x + c1, elementwise
  concat_cols,
  rowsum,
  colmean,
  mean_all,
};

class Tape;

/// Handle to a tape node. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  int idx = -1;
  const Tensor& val() const;
  std::int64_t rows() const { return val().rows; }
  std::int64_t cols() const { return val().cols; }
};

struct Node {
  Op op;
  int a = -1;
  int b = -1;
  kernels::Bcast bc = kernels::Bcast::same;
  double c0 = 0.0;
  double c1 = 0.0;
  Tensor value;
};

/// Gradients of a scalar root with respect to every registered leaf, in leaf
/// registration order. Leaves the root does not reach get zero gradients.
struct GradientMap {
  std::vector<Tensor> by_leaf;
  std::vector<std::string> names;
};

/// Records primitive operations in topological order (parents always precede
/// their node) and replays them in reverse for exact gradients. Gradient
/// accumulation over fan-out follows tape order, keeping runs reproducible.
/// A tape is a single-threaded object; kernels may parallelize internally.
class Tape {
 public:
  Var constant(Tensor v);
  Var leaf(Tensor v, std::string name);

  int num_leaves() const { return static_cast<int>(leaves_.size()); }
  Var leaf_var(int li) const { return Var{const_cast<Tape*>(this), leaves_[li]}; }
  const std::string& leaf_name(int li) const { return leaf_names_[li]; }

  const Tensor& value(int idx) const { return nodes_[idx].value; }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse-mode sweep from a scalar root. Throws on non-scalar roots.
  GradientMap backward(Var root) const;

  /// When on, every recorded value is checked for NaN/Inf.
  void set_checked(bool on) { checked_ = on; }

  Var push(Node n);

 private:
  std::vector<Node> nodes_;
  std::vector<int> leaves_;
  std::vector<std::string> leaf_names_;
  bool checked_ = false;
};

// Primitive operations. The first operand carries the output shape; the
// second may broadcast (matching shape, a (1,c) row, an (r,1) column, or a
// (1,1) scalar). Shape mismatches throw std::invalid_argument.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var relu(Var a);
Var square(Var a);
Var sqrt_v(Var a);
Var exp_v(Var a);
Var sin_v(Var a);
Var cos_v(Var a);
Var neg(Var a);
Var affine(Var a, double mul, double add);
Var concat_cols(Var a, Var b);
Var rowsum(Var a);
Var colmean(Var a);
Var mean_all(Var a);

/// Max relative error between the supplied gradient and a central finite
/// difference of f, over every coordinate of every parameter:
///   max |(f(p+eps) - f(p-eps)) / (2 eps) - g| / (|g| + 1e-12).
/// Uses only forward evaluations of f, independent of the reverse sweep.
double finite_diff_check(const std::function<double(const std::vector<Tensor>&)>& f,
                         const std::vector<Tensor>& params, const std::vector<Tensor>& grads,
                         double eps);

}  // namespace bsde
