#include <cmath>

#include "bsde/kernels.hpp"

// OpenMP kernels. Work is split over independent output indices only; every
// output element keeps the reference kernels' inner accumulation order, so
// the results match `ref` bit for bit at any thread count. Tensors below the
// fork/join break-even delegate to the serial reference: entering libgomp
// costs several microseconds even for a one-thread team.

namespace bsde::kernels::par {

namespace {
constexpr std::int64_t kMinFlops = 65536;  // matmul-like kernels
constexpr std::int64_t kMinElems = 32768;  // elementwise kernels
}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_matmul(a, b);
  if (a.rows * a.cols * b.cols < kMinFlops) return ref::matmul(a, b);
  Tensor c(a.rows, b.cols);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < a.rows; ++i)
    for (std::int64_t k = 0; k < a.cols; ++k) {
      const double aik = a.at(i, k);
      for (std::int64_t j = 0; j < b.cols; ++j) c.at(i, j) += aik * b.at(k, j);
    }
  return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  if (a.rows != b.rows) throw std::invalid_argument("matmul_tn: inner dimension mismatch");
  if (a.rows * a.cols * b.cols < kMinFlops) return ref::matmul_tn(a, b);
  Tensor c(a.cols, b.cols);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < a.cols; ++i)
    for (std::int64_t k = 0; k < a.rows; ++k) {
      const double aki = a.at(k, i);
      for (std::int64_t j = 0; j < b.cols; ++j) c.at(i, j) += aki * b.at(k, j);
    }
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols != b.cols) throw std::invalid_argument("matmul_nt: inner dimension mismatch");
  if (a.rows * a.cols * b.rows < kMinFlops) return ref::matmul_nt(a, b);
  Tensor c(a.rows, b.rows);
#pragma omp parallel for schedule(static)
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
  if (a.size() < kMinElems) return ref::ewise(op, a, b, bc);
  Tensor c(a.rows, a.cols);
#pragma omp parallel for schedule(static)
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
  if (a.size() < kMinElems) return ref::map(op, a);
  Tensor c(a.rows, a.cols);
  const std::int64_t n = a.size();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) c.data[i] = apply_un(op, a.data[i]);
  return c;
}

Tensor affine(const Tensor& a, double mul, double add) {
  if (a.size() < kMinElems) return ref::affine(a, mul, add);
  Tensor c(a.rows, a.cols);
  const std::int64_t n = a.size();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) c.data[i] = mul * a.data[i] + add;
  return c;
}

Tensor rowsum(const Tensor& a) {
  if (a.size() < kMinElems) return ref::rowsum(a);
  Tensor c(a.rows, 1);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < a.rows; ++i) {
    double s = 0.0;
    for (std::int64_t j = 0; j < a.cols; ++j) s += a.at(i, j);
    c.at(i, 0) = s;
  }
  return c;
}

Tensor colsum(const Tensor& a) {
  // The column-parallel split strides across rows and loses to the serial
  // row-major pass at every shape this solver produces; delegate.
  return ref::colsum(a);
}

double sum_all(const Tensor& a) {
  // Same canonical order as ref: row partials combined in row order.
  if (a.size() < kMinElems) return ref::sum_all(a);
  std::vector<double> partial(static_cast<std::size_t>(a.rows), 0.0);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < a.rows; ++i) {
    double s = 0.0;
    for (std::int64_t j = 0; j < a.cols; ++j) s += a.at(i, j);
    partial[static_cast<std::size_t>(i)] = s;
  }
  double total = 0.0;
  for (double s : partial) total += s;
  return total;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows != b.rows) throw std::invalid_argument("concat_cols: row mismatch");
  if (a.size() + b.size() < kMinElems) return ref::concat_cols(a, b);
  Tensor c(a.rows, a.cols + b.cols);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < a.rows; ++i) {
    for (std::int64_t j = 0; j < a.cols; ++j) c.at(i, j) = a.at(i, j);
    for (std::int64_t j = 0; j < b.cols; ++j) c.at(i, a.cols + j) = b.at(i, j);
  }
  return c;
}

Tensor slice_cols(const Tensor& a, std::int64_t j0, std::int64_t n) {
  if (j0 < 0 || j0 + n > a.cols) throw std::invalid_argument("slice_cols: out of range");
  if (a.rows * n < kMinElems) return ref::slice_cols(a, j0, n);
  Tensor c(a.rows, n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < a.rows; ++i)
    for (std::int64_t j = 0; j < n; ++j) c.at(i, j) = a.at(i, j0 + j);
  return c;
}

void accumulate(Tensor& dst, const Tensor& src) {
  if (dst.size() < kMinElems) return ref::accumulate(dst, src);
  if (!dst.same_shape(src)) throw std::invalid_argument("accumulate: shape mismatch");
  const std::int64_t n = dst.size();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) dst.data[i] += src.data[i];
}

void accumulate_slice_cols(Tensor& dst, const Tensor& src, std::int64_t j0) {
  if (src.size() < kMinElems) return ref::accumulate_slice_cols(dst, src, j0);
  if (dst.rows != src.rows || j0 + src.cols > dst.cols)
    throw std::invalid_argument("accumulate_slice_cols: out of range");
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < src.rows; ++i)
    for (std::int64_t j = 0; j < src.cols; ++j) dst.at(i, j0 + j) += src.at(i, j);
}

void adam_update(Tensor& p, const Tensor& g, Tensor& m, Tensor& v, double lr, double beta1,
                 double beta2, double eps, double bias1, double bias2) {
  if (p.size() < kMinElems)
    return ref::adam_update(p, g, m, v, lr, beta1, beta2, eps, bias1, bias2);
  const std::int64_t n = p.size();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    m.data[i] = beta1 * m.data[i] + (1.0 - beta1) * g.data[i];
    v.data[i] = beta2 * v.data[i] + (1.0 - beta2) * g.data[i] * g.data[i];
    const double mhat = m.data[i] / bias1;
    const double vhat = v.data[i] / bias2;
    p.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace bsde::kernels::par
