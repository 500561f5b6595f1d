#include "bsde/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bsde::kernels {

namespace {
Backend g_backend =
#ifdef _OPENMP
    Backend::openmp;
#else
    Backend::serial;
#endif
}  // namespace

void set_backend(Backend b) { g_backend = b; }
Backend backend() { return g_backend; }

bool openmp_compiled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void check_matmul(const Tensor& a, const Tensor& b) {
  if (a.cols != b.rows)
    throw std::invalid_argument("matmul: shape mismatch " + shape_str(a) + " x " + shape_str(b));
}

void check_ewise(const Tensor& a, const Tensor& b, Bcast bc) {
  bool ok = false;
  switch (bc) {
    case Bcast::same: ok = a.same_shape(b); break;
    case Bcast::row: ok = b.rows == 1 && b.cols == a.cols; break;
    case Bcast::col: ok = b.rows == a.rows && b.cols == 1; break;
    case Bcast::scalar: ok = b.rows == 1 && b.cols == 1; break;
  }
  if (!ok)
    throw std::invalid_argument("ewise: operand " + shape_str(b) + " does not broadcast against " +
                                shape_str(a));
}

#define BSDE_DISPATCH(call) return g_backend == Backend::openmp ? par::call : ref::call

Tensor matmul(const Tensor& a, const Tensor& b) { BSDE_DISPATCH(matmul(a, b)); }
Tensor matmul_tn(const Tensor& a, const Tensor& b) { BSDE_DISPATCH(matmul_tn(a, b)); }
Tensor matmul_nt(const Tensor& a, const Tensor& b) { BSDE_DISPATCH(matmul_nt(a, b)); }
Tensor ewise(BinOp op, const Tensor& a, const Tensor& b, Bcast bc) {
  BSDE_DISPATCH(ewise(op, a, b, bc));
}
Tensor map(UnOp op, const Tensor& a) { BSDE_DISPATCH(map(op, a)); }
Tensor affine(const Tensor& a, double mul, double add) { BSDE_DISPATCH(affine(a, mul, add)); }
Tensor rowsum(const Tensor& a) { BSDE_DISPATCH(rowsum(a)); }
Tensor colsum(const Tensor& a) { BSDE_DISPATCH(colsum(a)); }
double sum_all(const Tensor& a) { BSDE_DISPATCH(sum_all(a)); }
Tensor concat_cols(const Tensor& a, const Tensor& b) { BSDE_DISPATCH(concat_cols(a, b)); }
Tensor slice_cols(const Tensor& a, std::int64_t j0, std::int64_t n) {
  BSDE_DISPATCH(slice_cols(a, j0, n));
}
void accumulate(Tensor& dst, const Tensor& src) {
  if (g_backend == Backend::openmp)
    par::accumulate(dst, src);
  else
    ref::accumulate(dst, src);
}
void accumulate_slice_cols(Tensor& dst, const Tensor& src, std::int64_t j0) {
  if (g_backend == Backend::openmp)
    par::accumulate_slice_cols(dst, src, j0);
  else
    ref::accumulate_slice_cols(dst, src, j0);
}
void adam_update(Tensor& p, const Tensor& g, Tensor& m, Tensor& v, double lr, double beta1,
                 double beta2, double eps, double bias1, double bias2) {
  if (g_backend == Backend::openmp)
    par::adam_update(p, g, m, v, lr, beta1, beta2, eps, bias1, bias2);
  else
    ref::adam_update(p, g, m, v, lr, beta1, beta2, eps, bias1, bias2);
}

#undef BSDE_DISPATCH

}  // namespace bsde::kernels
