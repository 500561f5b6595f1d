#include "bsde/problem.hpp"

#include <cmath>

namespace bsde {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
}

double FbsdeProblem::y0_reference() const {
  if (!has_analytic()) throw std::logic_error("y0_reference: problem has no analytic solution");
  Tensor xi(1, dim_x, std::vector<double>(initial));
  return analytic_u(0.0, xi).value();
}

void ProblemConstants::validate() const {
  auto nonneg = [](double v, const char* field) {
    if (!(v >= 0.0))
      throw std::invalid_argument(std::string("ProblemConstants: ") + field +
                                  " must be nonnegative");
  };
  nonneg(K, "K");
  nonneg(b_y, "b_y");
  nonneg(sigma_x, "sigma_x");
  nonneg(sigma_y, "sigma_y");
  nonneg(f_x, "f_x");
  nonneg(f_z, "f_z");
  nonneg(g_x, "g_x");
  nonneg(b_0, "b_0");
  nonneg(sigma_0, "sigma_0");
  nonneg(f_0, "f_0");
  nonneg(g_0, "g_0");
  if (!(T > 0.0)) throw std::invalid_argument("ProblemConstants: T must be positive");
  for (double v : {b_y, sigma_x, sigma_y, f_x, f_z, g_x}) {
    if (v > K + 1e-12)
      throw std::invalid_argument("ProblemConstants: K must bound every Lipschitz constant");
  }
  if (!std::isfinite(k_b) || !std::isfinite(k_f))
    throw std::invalid_argument("ProblemConstants: k_b/k_f must be finite");
}

namespace {

FbsdeProblem make_example1(std::int64_t d) {
  FbsdeProblem p;
  p.name = "example1";
  p.dim_x = d;
  p.dim_w = d;
  p.horizon = 5.0;
  p.initial.assign(static_cast<std::size_t>(d), 1.0);
  const double dd = static_cast<double>(d);

  // Shared subexpressions: x2 = x^2, onep = 1+x^2, twop = 2+x^2,
  // nrm = |x|^2 (B,1), expo = exp(-2|x|^2/(d(t+5))) (B,1).
  p.drift = [](double, Var x, Var) {
    Var x2 = square(x);
    Var onep = affine(x2, 1.0, 1.0);
    Var twop = affine(x2, 1.0, 2.0);
    Var twop3 = mul(square(twop), twop);
    return div(mul(x, onep), twop3);
  };

  p.diffusion_apply = [dd](double t, Var x, Var y, Var w) {
    const double s = t + 5.0;
    Var x2 = square(x);
    Var frac = div(affine(x2, 1.0, 1.0), affine(x2, 1.0, 2.0));  // (1+x^2)/(2+x^2)
    Var nrm = rowsum(x2);
    Var expo = exp_v(affine(nrm, -2.0 / (dd * s), 0.0));
    Var y2 = square(y);
    Var num = affine(y2, 2.0, 1.0);            // 1 + 2y^2
    Var den = add(affine(y2, 1.0, 1.0), expo);  // 1 + y^2 + expo
    Var scale = sqrt_v(div(num, den));          // (B,1)
    return mul(mul(frac, scale), w);
  };

  p.driver = [dd](double t, Var x, Var y, Var z) {
    const double s = t + 5.0;
    Var x2 = square(x);
    Var onep = affine(x2, 1.0, 1.0);
    Var twop = affine(x2, 1.0, 2.0);
    Var twop2 = square(twop);
    Var twop3 = mul(twop2, twop);
    Var nrm = rowsum(x2);

    // a(t,x): prefactor exp(-|x|^2/(d s))/(d s) times the summed bracket.
    Var pref = affine(exp_v(affine(nrm, -1.0 / (dd * s), 0.0)), 1.0 / (dd * s), 0.0);
    Var term1 = div(mul(affine(x2, 4.0, 0.0), onep), twop3);
    Var term2 = div(square(onep), twop2);
    Var term3 = affine(div(mul(x2, square(onep)), twop2), -2.0 / (dd * s), 0.0);
    Var term4 = affine(x2, -1.0 / s, 0.0);
    Var a_val = mul(pref, rowsum(add(add(term1, term2), add(term3, term4))));

    // sum_j b(t,x_j,y) z_j with b = x/(2+x^2)^2 * sqrt((1+y^2+expo)/(1+2y^2)).
    Var expo = exp_v(affine(nrm, -2.0 / (dd * s), 0.0));
    Var y2 = square(y);
    Var ratio = sqrt_v(div(add(affine(y2, 1.0, 1.0), expo), affine(y2, 2.0, 1.0)));
    Var bz = rowsum(mul(mul(div(x, twop2), ratio), z));
    return add(a_val, bz);
  };

  p.terminal = [dd](Var x) {
    const double T = 5.0;
    return exp_v(affine(rowsum(square(x)), -1.0 / (dd * (T + 5.0)), 0.0));
  };

  p.analytic_u = [dd](double t, const Tensor& x) {
    Tensor out(x.rows, 1);
    for (std::int64_t i = 0; i < x.rows; ++i) {
      double nrm = 0.0;
      for (std::int64_t j = 0; j < x.cols; ++j) nrm += x.at(i, j) * x.at(i, j);
      out.at(i, 0) = std::exp(-nrm / (dd * (t + 5.0)));
    }
    return out;
  };
  return p;
}

FbsdeProblem make_example2(std::int64_t d, const Example2Params& prm) {
  if (!(prm.sigma > 0.0)) throw std::invalid_argument("example2: sigma must be positive");
  FbsdeProblem p;
  p.name = "example2";
  p.dim_x = d;
  p.dim_w = d;
  p.horizon = 1.0;
  p.initial.assign(static_cast<std::size_t>(d), kPi / 2.0);
  const double sigma = prm.sigma, r = prm.r, D = prm.D, T = p.horizon;

  p.diffusion_apply = [sigma](double, Var, Var y, Var w) {
    return mul(w, affine(y, sigma, 0.0));
  };

  p.driver = [sigma, r, D, T](double t, Var x, Var y, Var) {
    Var base = affine(rowsum(sin_v(x)), D, 0.0);
    Var cubic = mul(mul(base, base), base);
    const double coef = 0.5 * sigma * sigma * std::exp(-3.0 * r * (T - t));
    return add(affine(y, -r, 0.0), affine(cubic, coef, 0.0));
  };

  p.terminal = [D](Var x) { return affine(rowsum(sin_v(x)), D, 0.0); };

  p.analytic_u = [r, D, T](double t, const Tensor& x) {
    Tensor out(x.rows, 1);
    for (std::int64_t i = 0; i < x.rows; ++i) {
      double s = 0.0;
      for (std::int64_t j = 0; j < x.cols; ++j) s += std::sin(x.at(i, j));
      out.at(i, 0) = std::exp(-r * (T - t)) * D * s;
    }
    return out;
  };
  return p;
}

FbsdeProblem make_linear1d(double xi) {
  FbsdeProblem p;
  p.name = "linear1d";
  p.dim_x = 1;
  p.dim_w = 1;
  p.horizon = 1.0;
  p.initial = {xi};
  p.diffusion_apply = [](double, Var, Var, Var w) { return w; };
  p.terminal = [](Var x) { return x; };
  p.analytic_u = [](double, const Tensor& x) { return x; };
  return p;
}

}  // namespace

FbsdeProblem builtin_problem(const std::string& name, std::int64_t dim, const Example2Params& p2,
                             double linear1d_xi) {
  if (dim < 1) throw std::invalid_argument("builtin_problem: dim must be >= 1");
  if (name == "example1") return make_example1(dim);
  if (name == "example2") return make_example2(dim, p2);
  if (name == "linear1d") return make_linear1d(linear1d_xi);
  throw std::invalid_argument("builtin_problem: unknown name '" + name + "'");
}

std::function<Var(double, Var, Var, Var)> diffusion_apply_const_matrix(Tensor sigma) {
  // w (B,d) -> w * sigma^T, i.e. rows are sigma * w_row.
  Tensor sigma_t(sigma.cols, sigma.rows);
  for (std::int64_t i = 0; i < sigma.rows; ++i)
    for (std::int64_t j = 0; j < sigma.cols; ++j) sigma_t.at(j, i) = sigma.at(i, j);
  return [sigma_t = std::move(sigma_t)](double, Var, Var, Var w) {
    return matmul(w, w.tape->constant(sigma_t));
  };
}

CoefficientBatch eval_coefficients(const FbsdeProblem& problem, double t, const Tensor& x,
                                   const Tensor& y, const Tensor& z, const Tensor& w) {
  if (x.cols != problem.dim_x || w.cols != problem.dim_w || y.cols != 1 || z.cols != problem.dim_w)
    throw std::invalid_argument("eval_coefficients: batch shapes do not match problem dims");
  if (t < 0.0 || t > problem.horizon)
    throw std::invalid_argument("eval_coefficients: t outside [0, T]");
  Tape tape;
  Var xv = tape.constant(x), yv = tape.constant(y), zv = tape.constant(z), wv = tape.constant(w);
  CoefficientBatch out;
  out.drift = problem.drift ? problem.drift(t, xv, yv).val() : Tensor::zeros(x.rows, x.cols);
  out.diffusion = problem.diffusion_apply(t, xv, yv, wv).val();
  out.driver = problem.driver ? problem.driver(t, xv, yv, zv).val() : Tensor::zeros(x.rows, 1);
  for (const auto* part : {&out.drift, &out.diffusion, &out.driver})
    if (!part->all_finite())
      throw std::runtime_error("eval_coefficients: non-finite coefficient output at t=" +
                               std::to_string(t));
  return out;
}

Tensor analytic_reference(const FbsdeProblem& problem, double t, const Tensor& x) {
  if (!problem.has_analytic())
    throw std::logic_error("analytic_reference: problem '" + problem.name +
                           "' has no analytic solution");
  return problem.analytic_u(t, x);
}

}  // namespace bsde
