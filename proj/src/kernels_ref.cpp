#include <cmath>

#include "bsde/kernels.hpp"

// Serial reference kernels. Straight loops, no pragmas. The accumulation
// order per output element (ascending inner index) is the canonical order
// the OpenMP kernels reproduce.

namespace bsde::kernels::ref {

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_matmul(a, b);
  Tensor c(a.rows, b.cols);
  for (std::int64_t i = 0; i < a.rows; ++i)
    for (std::int64_t k = 0; k < a.cols; ++k) {
      const double aik = a.at(i, k);
      for (std::int64_t j = 0; j < b.cols; ++j) c.at(i, j) += aik * b.at(k, j);
    }
  return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  if (a.rows != b.rows) throw std::invalid_argument("matmul_tn: inner dimension mismatch");
  Tensor c(a.cols, b.cols);
  for (std::int64_t k = 0; k < a.rows; ++k)
    for (std::int64_t i = 0; i < a.cols; ++i) {
      const double aki = a.at(k, i);
      for (std::int64_t j = 0; j < b.cols; ++j) c.at(i, j) += aki * b.at(k, j);
    }
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols != b.cols) throw std::invalid_argument("matmul_nt: inner dimension mismatch");
  Tensor c(a.rows, b.rows);
  for (std::int64_t i = 0; i < a.rows; ++i)
    for (std::int64_t j = 0; j < b.rows; ++j) {
      double s = 0.0;
      for (std::int64_t k = 0; k < a.cols; ++k) s += a.at(i, k) * b.at(j, k);
      c.at(i, j) = s;
    }
  return c;
}

static double apply_bin(BinOp op, double x, double y) {
  switch (op) {
    case BinOp::add: return x + y;
    case BinOp::sub: return x - y;
    case BinOp::mul: return x * y;
    case BinOp::div: return x / y;
  }
  return 0.0;
}

Tensor ewise(BinOp op, const Tensor& a, const Tensor& b, Bcast bc) {
  check_ewise(a, b, bc);
  Tensor c(a.rows, a.cols);
  for (std::int64_t i = 0; i < a.rows; ++i)
    for (std::int64_t j = 0; j < a.cols; ++j) {
      double y = 0.0;
      switch (bc) {
        case Bcast::same: y = b.at(i, j); break;
        case Bcast::row: y = b.at(0, j); break;
        case Bcast::col: y = b.at(i, 0); break;
        case Bcast::scalar: y = b.data[0]; break;
      }
      c.at(i, j) = apply_bin(op, a.at(i, j), y);
    }
  return c;
}

static double apply_un(UnOp op, double x) {
  switch (op) {
    case UnOp::relu: return x > 0.0 ? x : 0.0;
    case UnOp::square: return x * x;
    case UnOp::sqrt_fn: return std::sqrt(x);
    case UnOp::exp_fn: return std::exp(x);
    case UnOp::sin_fn: return std::sin(x);
    case UnOp::cos_fn: return std::cos(x);
    case UnOp::neg: return -x;
    case UnOp::gt0: return x > 0.0 ? 1.0 : 0.0;
  }
  return 0.0;
}

Tensor map(UnOp op, const Tensor& a) {
  Tensor c(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i) c.data[i] = apply_un(op, a.data[i]);
  return c;
}

Tensor affine(const Tensor& a, double mul, double add) {
  Tensor c(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i) c.data[i] = mul * a.data[i] + add;
  return c;
}

Tensor rowsum(const Tensor& a) {
  Tensor c(a.rows, 1);
  for (std::int64_t i = 0; i < a.rows; ++i) {
    double s = 0.0;
    for (std::int64_t j = 0; j < a.cols; ++j) s += a.at(i, j);
    c.at(i, 0) = s;
  }
  return c;
}

Tensor colsum(const Tensor& a) {
  Tensor c(1, a.cols);
  for (std::int64_t i = 0; i < a.rows; ++i)
    for (std::int64_t j = 0; j < a.cols; ++j) c.at(0, j) += a.at(i, j);
  return c;
}

double sum_all(const Tensor& a) {
  // Canonical order: per-row partial sums, combined in row order.
  double total = 0.0;
  for (std::int64_t i = 0; i < a.rows; ++i) {
    double s = 0.0;
    for (std::int64_t j = 0; j < a.cols; ++j) s += a.at(i, j);
    total += s;
  }
  return total;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows != b.rows) throw std::invalid_argument("concat_cols: row mismatch");
  Tensor c(a.rows, a.cols + b.cols);
  for (std::int64_t i = 0; i < a.rows; ++i) {
    for (std::int64_t j = 0; j < a.cols; ++j) c.at(i, j) = a.at(i, j);
    for (std::int64_t j = 0; j < b.cols; ++j) c.at(i, a.cols + j) = b.at(i, j);
  }
  return c;
}

Tensor slice_cols(const Tensor& a, std::int64_t j0, std::int64_t n) {
  if (j0 < 0 || j0 + n > a.cols) throw std::invalid_argument("slice_cols: out of range");
  Tensor c(a.rows, n);
  for (std::int64_t i = 0; i < a.rows; ++i)
    for (std::int64_t j = 0; j < n; ++j) c.at(i, j) = a.at(i, j0 + j);
  return c;
}

void accumulate(Tensor& dst, const Tensor& src) {
  if (!dst.same_shape(src)) throw std::invalid_argument("accumulate: shape mismatch");
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

void accumulate_slice_cols(Tensor& dst, const Tensor& src, std::int64_t j0) {
  if (dst.rows != src.rows || j0 + src.cols > dst.cols)
    throw std::invalid_argument("accumulate_slice_cols: out of range");
  for (std::int64_t i = 0; i < src.rows; ++i)
    for (std::int64_t j = 0; j < src.cols; ++j) dst.at(i, j0 + j) += src.at(i, j);
}

void adam_update(Tensor& p, const Tensor& g, Tensor& m, Tensor& v, double lr, double beta1,
                 double beta2, double eps, double bias1, double bias2) {
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    m.data[i] = beta1 * m.data[i] + (1.0 - beta1) * g.data[i];
    v.data[i] = beta2 * v.data[i] + (1.0 - beta2) * g.data[i] * g.data[i];
    const double mhat = m.data[i] / bias1;
    const double vhat = v.data[i] / bias2;
    p.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace bsde::kernels::ref
