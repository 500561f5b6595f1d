#pragma once

#include <cstdint>

#include "bsde/tensor.hpp"

namespace bsde::kernels {

// Two interchangeable kernel sets: `ref` is the plain serial implementation
// kept as the correctness reference, `par` carries the OpenMP pragmas. Both
// accumulate every output element in the same index order, so results are
// bit-identical between backends and independent of the thread count.

enum class Backend { serial, openmp };

void set_backend(Backend b);
Backend backend();
bool openmp_compiled();
int max_threads();

/// Broadcast mode of the second operand against the first (rows, cols):
/// same = (rows, cols), row = (1, cols), col = (rows, 1), scalar = (1, 1).
enum class Bcast { same, row, col, scalar };
enum class BinOp { add, sub, mul, div };
enum class UnOp { relu, square, sqrt_fn, exp_fn, sin_fn, cos_fn, neg, gt0 };

namespace ref {
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // a^T * b
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a * b^T
Tensor ewise(BinOp op, const Tensor& a, const Tensor& b, Bcast bc);
Tensor map(UnOp op, const Tensor& a);
Tensor affine(const Tensor& a, double mul, double add);
Tensor rowsum(const Tensor& a);
Tensor colsum(const Tensor& a);
double sum_all(const Tensor& a);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& a, std::int64_t j0, std::int64_t n);
void accumulate(Tensor& dst, const Tensor& src);
void accumulate_slice_cols(Tensor& dst, const Tensor& src, std::int64_t j0);
void adam_update(Tensor& p, const Tensor& g, Tensor& m, Tensor& v, double lr, double beta1,
                 double beta2, double eps, double bias1, double bias2);
}  // namespace ref

namespace par {
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_tn(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor ewise(BinOp op, const Tensor& a, const Tensor& b, Bcast bc);
Tensor map(UnOp op, const Tensor& a);
Tensor affine(const Tensor& a, double mul, double add);
Tensor rowsum(const Tensor& a);
Tensor colsum(const Tensor& a);
double sum_all(const Tensor& a);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& a, std::int64_t j0, std::int64_t n);
void accumulate(Tensor& dst, const Tensor& src);
void accumulate_slice_cols(Tensor& dst, const Tensor& src, std::int64_t j0);
void adam_update(Tensor& p, const Tensor& g, Tensor& m, Tensor& v, double lr, double beta1,
                 double beta2, double eps, double bias1, double bias2);
}  // namespace par

// Dispatch to the active backend.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_tn(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor ewise(BinOp op, const Tensor& a, const Tensor& b, Bcast bc);
Tensor map(UnOp op, const Tensor& a);
Tensor affine(const Tensor& a, double mul, double add);
Tensor rowsum(const Tensor& a);
Tensor colsum(const Tensor& a);
double sum_all(const Tensor& a);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& a, std::int64_t j0, std::int64_t n);
void accumulate(Tensor& dst, const Tensor& src);
void accumulate_slice_cols(Tensor& dst, const Tensor& src, std::int64_t j0);
void adam_update(Tensor& p, const Tensor& g, Tensor& m, Tensor& v, double lr, double beta1,
                 double beta2, double eps, double bias1, double bias2);

// Shape checks shared by both backends; throw std::invalid_argument.
void check_matmul(const Tensor& a, const Tensor& b);
void check_ewise(const Tensor& a, const Tensor& b, Bcast bc);

}  // namespace bsde::kernels
