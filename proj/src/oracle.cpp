#include "bsde/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace bsde {

std::int64_t RegressionBasis::n_features() const {
  return static_cast<std::int64_t>(exponents().size());
}

std::vector<std::vector<int>> RegressionBasis::exponents() const {
  if (dim < 1 || dim > 3) throw std::invalid_argument("RegressionBasis: dim must be in [1,3]");
  if (degree < 0 || degree > 4)
    throw std::invalid_argument("RegressionBasis: degree must be in [0,4]");
  std::vector<std::vector<int>> out;
  for (int total = 0; total <= degree; ++total) {
    std::vector<int> e(static_cast<std::size_t>(dim), 0);
    // Enumerate exponent tuples of the given total degree, lexicographically.
    std::function<void(int, int)> rec = [&](int pos, int remaining) {
      if (pos == dim - 1) {
        e[static_cast<std::size_t>(pos)] = remaining;
        out.push_back(e);
        return;
      }
      for (int k = remaining; k >= 0; --k) {
        e[static_cast<std::size_t>(pos)] = k;
        rec(pos + 1, remaining - k);
      }
    };
    rec(0, total);
  }
  return out;
}

Tensor poly_features(const RegressionBasis& basis, const Tensor& x) {
  if (x.cols != basis.dim) throw std::invalid_argument("poly_features: state dim mismatch");
  const auto exps = basis.exponents();
  Tensor f(x.rows, static_cast<std::int64_t>(exps.size()));
  for (std::int64_t p = 0; p < x.rows; ++p) {
    for (std::size_t k = 0; k < exps.size(); ++k) {
      double v = 1.0;
      for (int j = 0; j < basis.dim; ++j) {
        const int e = exps[k][static_cast<std::size_t>(j)];
        for (int q = 0; q < e; ++q) v *= x.at(p, j);
      }
      f.at(p, static_cast<std::int64_t>(k)) = v;
    }
  }
  return f;
}

namespace {

/// Cholesky solve of the symmetric system G X = B; returns false when G is
/// not numerically positive definite.
bool cholesky_solve(Tensor G, Tensor& B) {
  const std::int64_t n = G.rows;
  for (std::int64_t j = 0; j < n; ++j) {
    double d = G.at(j, j);
    for (std::int64_t k = 0; k < j; ++k) d -= G.at(j, k) * G.at(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    const double ljj = std::sqrt(d);
    G.at(j, j) = ljj;
    for (std::int64_t i = j + 1; i < n; ++i) {
      double s = G.at(i, j);
      for (std::int64_t k = 0; k < j; ++k) s -= G.at(i, k) * G.at(j, k);
      G.at(i, j) = s / ljj;
    }
  }
  // Forward then backward substitution per target column.
  for (std::int64_t c = 0; c < B.cols; ++c) {
    for (std::int64_t i = 0; i < n; ++i) {
      double s = B.at(i, c);
      for (std::int64_t k = 0; k < i; ++k) s -= G.at(i, k) * B.at(k, c);
      B.at(i, c) = s / G.at(i, i);
    }
    for (std::int64_t i = n - 1; i >= 0; --i) {
      double s = B.at(i, c);
      for (std::int64_t k = i + 1; k < n; ++k) s -= G.at(k, i) * B.at(k, c);
      B.at(i, c) = s / G.at(i, i);
    }
  }
  return true;
}

}  // namespace

RegressionResult regress_conditional(const Tensor& features, const Tensor& targets) {
  if (features.rows < features.cols)
    throw std::invalid_argument("regress_conditional: fewer rows than features");
  if (features.rows != targets.rows)
    throw std::invalid_argument("regress_conditional: row count mismatch");
  require_finite(features, "regression features");
  require_finite(targets, "regression targets");

  Tensor G = kernels::matmul_tn(features, features);
  Tensor B = kernels::matmul_tn(features, targets);
  RegressionResult out;
  Tensor X = B;
  if (!cholesky_solve(G, X)) {
    double trace = 0.0;
    for (std::int64_t i = 0; i < G.rows; ++i) trace += G.at(i, i);
    const double ridge = std::max(1e-10 * trace / static_cast<double>(G.rows), 1e-300);
    Tensor Greg = G;
    for (std::int64_t i = 0; i < G.rows; ++i) Greg.at(i, i) += ridge;
    X = B;
    if (!cholesky_solve(Greg, X))
      throw std::runtime_error("regress_conditional: singular design even after regularization");
    out.regularized = true;
  }
  out.coef = std::move(X);
  return out;
}

namespace {

/// Squared standard error of the fitted conditional expectation at the mean
/// feature point: residual_var * fbar^T G^{-1} fbar.
double fit_se2_at_mean(const Tensor& features, const Tensor& target, const Tensor& fitted) {
  const std::int64_t n = features.rows, F = features.cols;
  double rss = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double r = target.at(i, 0) - fitted.at(i, 0);
    rss += r * r;
  }
  const double dof = std::max<double>(1.0, static_cast<double>(n - F));
  const double resid_var = rss / dof;
  Tensor fbar(F, 1);
  for (std::int64_t j = 0; j < F; ++j) {
    double s = 0.0;
    for (std::int64_t i = 0; i < n; ++i) s += features.at(i, j);
    fbar.at(j, 0) = s / static_cast<double>(n);
  }
  Tensor G = kernels::matmul_tn(features, features);
  Tensor u = fbar;
  if (!cholesky_solve(G, u)) return resid_var / static_cast<double>(n);
  double leverage = 0.0;
  for (std::int64_t j = 0; j < F; ++j) leverage += fbar.at(j, 0) * u.at(j, 0);
  return resid_var * std::max(leverage, 0.0);
}

}  // namespace

namespace {

Tensor eval_terminal(const FbsdeProblem& problem, const Tensor& x) {
  Tape tape;
  return problem.terminal(tape.constant(x)).val();
}

Tensor eval_driver(const FbsdeProblem& problem, double t, const Tensor& x, const Tensor& y,
                   const Tensor& z) {
  if (!problem.driver) return Tensor::zeros(x.rows, 1);
  Tape tape;
  return problem.driver(t, tape.constant(x), tape.constant(y), tape.constant(z)).val();
}

struct ForwardStep {
  Tensor x_next;
};

ForwardStep forward_step(const FbsdeProblem& problem, double t, double h, const Tensor& x,
                         const Tensor& y, const Tensor& dw) {
  Tape tape;
  Var xv = tape.constant(x), yv = tape.constant(y), wv = tape.constant(dw);
  Var xn = xv;
  if (problem.drift) xn = add(xn, affine(problem.drift(t, xv, yv), h, 0.0));
  xn = add(xn, problem.diffusion_apply(t, xv, yv, wv));
  return {xn.val()};
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace

OracleSolution lsmc_implicit_solve(const FbsdeProblem& problem, const TimeGrid& grid,
                                   const OracleConfig& cfg) {
  if (problem.dim_x > 3)
    throw std::invalid_argument("lsmc_implicit_solve: oracle supports dim <= 3");
  RegressionBasis basis = cfg.basis;
  basis.dim = static_cast<int>(problem.dim_x);
  const std::int64_t P = cfg.n_paths;
  const std::int64_t N = grid.N, m = problem.dim_x, d = problem.dim_w;
  if (P < 10 * basis.n_features())
    throw std::invalid_argument("lsmc_implicit_solve: n_paths too small for the basis");

  const double sqrt_h = std::sqrt(grid.h);
  Tensor xi(1, m, std::vector<double>(problem.initial));

  OracleSolution sol;
  sol.n_paths = P;
  std::vector<Tensor> y_coef_prev;  // from the previous sweep
  std::vector<Tensor> x_lo_prev, x_hi_prev;
  // Standardization per step, frozen on the first sweep: raw monomials of a
  // narrow state range are nearly collinear, which makes the normal
  // equations ill-conditioned and the coefficient-change convergence metric
  // meaningless. Freezing keeps the basis comparable across sweeps.
  std::vector<Tensor> x_shift(static_cast<std::size_t>(N)), x_scale(static_cast<std::size_t>(N));
  bool standardization_frozen = false;

  auto standardized_features = [&](std::int64_t i, const Tensor& x) {
    Tensor z = x;
    const Tensor& shift = x_shift[static_cast<std::size_t>(i)];
    const Tensor& scale = x_scale[static_cast<std::size_t>(i)];
    for (std::int64_t p_ = 0; p_ < z.rows; ++p_)
      for (std::int64_t j = 0; j < z.cols; ++j)
        z.at(p_, j) = (z.at(p_, j) - shift.at(0, j)) / scale.at(0, j);
    return poly_features(basis, z);
  };

  // The fitted value function is only trusted on the state range it was
  // fitted on; outside it the polynomial tails blow up and destabilize the
  // coupled forward simulation, so evaluation clamps into the fitted box.
  auto eval_value_fn = [&](std::int64_t i, const Tensor& x) -> Tensor {
    if (y_coef_prev.empty()) return eval_terminal(problem, x);  // first-sweep proxy
    if (i == 0) {
      Tensor out(x.rows, 1);
      for (auto& v : out.data) v = y_coef_prev[0].at(0, 0);
      return out;
    }
    Tensor xc = x;
    const Tensor& lo = x_lo_prev[static_cast<std::size_t>(i)];
    const Tensor& hi = x_hi_prev[static_cast<std::size_t>(i)];
    for (std::int64_t p_ = 0; p_ < xc.rows; ++p_)
      for (std::int64_t j = 0; j < xc.cols; ++j)
        xc.at(p_, j) = std::min(std::max(xc.at(p_, j), lo.at(0, j)), hi.at(0, j));
    return kernels::matmul(standardized_features(i, xc), y_coef_prev[static_cast<std::size_t>(i)]);
  };

  for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
    // Forward pass with the Brownian increments replayed from the same seed.
    GaussianStream rng(cfg.seed);
    std::vector<Tensor> X(static_cast<std::size_t>(N + 1));
    std::vector<Tensor> dW(static_cast<std::size_t>(N));
    X[0] = Tensor(P, m);
    for (std::int64_t p = 0; p < P; ++p)
      for (std::int64_t j = 0; j < m; ++j) X[0].at(p, j) = xi.at(0, j);
    for (std::int64_t i = 0; i < N; ++i) {
      dW[static_cast<std::size_t>(i)] = kernels::affine(rng.sample(P, d), sqrt_h, 0.0);
      Tensor y_here = eval_value_fn(i, X[static_cast<std::size_t>(i)]);
      X[static_cast<std::size_t>(i + 1)] =
          forward_step(problem, grid.knot(i), grid.h, X[static_cast<std::size_t>(i)], y_here,
                       dW[static_cast<std::size_t>(i)])
              .x_next;
    }

    // Backward pass.
    std::vector<Tensor> y_coef(static_cast<std::size_t>(N));
    std::vector<Tensor> z_coef(static_cast<std::size_t>(N));
    std::vector<Tensor> x_lo(static_cast<std::size_t>(N)), x_hi(static_cast<std::size_t>(N));
    sol.inner_history.assign(static_cast<std::size_t>(N), {});
    Tensor y_next = eval_terminal(problem, X[static_cast<std::size_t>(N)]);
    double y0_se2 = 0.0;
    std::vector<double> z0;

    for (std::int64_t i = N - 1; i >= 0; --i) {
      const double t = grid.knot(i);
      const Tensor& x_i = X[static_cast<std::size_t>(i)];
      const Tensor& dw_i = dW[static_cast<std::size_t>(i)];
      const bool intercept_only = (i == 0);  // deterministic initial state
      if (!standardization_frozen) {
        Tensor shift(1, m), scale(1, m);
        for (std::int64_t j = 0; j < m; ++j) {
          double s1 = 0.0, s2 = 0.0;
          for (std::int64_t p = 0; p < P; ++p) {
            s1 += x_i.at(p, j);
            s2 += x_i.at(p, j) * x_i.at(p, j);
          }
          const double mean = s1 / static_cast<double>(P);
          const double sd = std::sqrt(std::max(s2 / static_cast<double>(P) - mean * mean, 0.0));
          shift.at(0, j) = mean;
          scale.at(0, j) = sd > 1e-12 ? sd : 1.0;
        }
        x_shift[static_cast<std::size_t>(i)] = std::move(shift);
        x_scale[static_cast<std::size_t>(i)] = std::move(scale);
      }
      Tensor f_i = intercept_only ? Tensor::full(P, 1, 1.0) : standardized_features(i, x_i);

      // Z_i = E[Y_{i+1} dW_i | F_i] / h, one regression target per component.
      Tensor zt(P, d);
      for (std::int64_t p = 0; p < P; ++p)
        for (std::int64_t j = 0; j < d; ++j)
          zt.at(p, j) = y_next.at(p, 0) * dw_i.at(p, j) / grid.h;
      RegressionResult zr = regress_conditional(f_i, zt);
      sol.any_regularized = sol.any_regularized || zr.regularized;
      Tensor z_i = kernels::matmul(f_i, zr.coef);

      // E[Y_{i+1} | F_i], then the implicit per-path equation
      // y = a + h f(t, x, y, z), a contraction for h < 1/sqrt(K).
      RegressionResult ar = regress_conditional(f_i, y_next);
      sol.any_regularized = sol.any_regularized || ar.regularized;
      Tensor a_i = kernels::matmul(f_i, ar.coef);
      Tensor y_i = a_i;
      if (problem.driver) {
        for (int it = 0; it < cfg.implicit_max_iter; ++it) {
          Tensor f_val = eval_driver(problem, t, x_i, y_i, z_i);
          Tensor y_new = a_i;
          for (std::int64_t p = 0; p < P; ++p) y_new.at(p, 0) += grid.h * f_val.at(p, 0);
          const double delta = max_abs_diff(y_new, y_i);
          y_i = std::move(y_new);
          if (cfg.record_inner) sol.inner_history[static_cast<std::size_t>(i)].push_back(delta);
          if (delta <= cfg.implicit_tol * (1.0 + std::abs(y_i.data[0]))) break;
        }
      }

      RegressionResult yr = regress_conditional(f_i, y_i);
      sol.any_regularized = sol.any_regularized || yr.regularized;
      y_coef[static_cast<std::size_t>(i)] = yr.coef;
      z_coef[static_cast<std::size_t>(i)] = zr.coef;
      Tensor lo(1, m), hi(1, m);
      for (std::int64_t j = 0; j < m; ++j) {
        double mn = x_i.at(0, j), mx = x_i.at(0, j);
        for (std::int64_t p = 1; p < P; ++p) {
          mn = std::min(mn, x_i.at(p, j));
          mx = std::max(mx, x_i.at(p, j));
        }
        lo.at(0, j) = mn;
        hi.at(0, j) = mx;
      }
      x_lo[static_cast<std::size_t>(i)] = std::move(lo);
      x_hi[static_cast<std::size_t>(i)] = std::move(hi);

      // Propagate the fitted conditional expectation's error: each step's
      // regression error feeds the next through a near-unit Lipschitz chain.
      y0_se2 += fit_se2_at_mean(f_i, y_next, a_i);

      if (i == 0) {
        z0.assign(static_cast<std::size_t>(d), 0.0);
        for (std::int64_t j = 0; j < d; ++j) z0[static_cast<std::size_t>(j)] = zr.coef.at(0, j);
      }
      y_next = std::move(y_i);
    }

    double change = std::numeric_limits<double>::infinity();
    if (!y_coef_prev.empty()) {
      change = 0.0;
      for (std::size_t i = 0; i < y_coef.size(); ++i)
        change = std::max(change, max_abs_diff(y_coef[i], y_coef_prev[i]));
    }
    sol.sweep_residuals.push_back(change);
    sol.sweeps_used = sweep;
    sol.y0 = y_coef[0].at(0, 0);
    sol.y0_se = std::sqrt(y0_se2);
    sol.z0 = std::move(z0);
    sol.y_coef = y_coef;
    sol.z_coef = std::move(z_coef);
    sol.x_lo = x_lo;
    sol.x_hi = x_hi;
    sol.x_shift = x_shift;
    sol.x_scale = x_scale;
    y_coef_prev = std::move(y_coef);
    x_lo_prev = std::move(x_lo);
    x_hi_prev = std::move(x_hi);
    standardization_frozen = true;

    if (change <= cfg.picard_tol) {
      sol.converged = true;
      return sol;
    }
  }

  std::ostringstream msg;
  msg << "lsmc_implicit_solve: Picard sweeps did not converge; sup-changes:";
  for (double r : sol.sweep_residuals) msg << ' ' << r;
  throw std::runtime_error(msg.str());
}

CrossCheckReport oracle_cross_check(const FbsdeProblem& problem, double y0_deep,
                                    const OracleSolution& oracle_sol) {
  CrossCheckReport r{};
  r.y0_deep = y0_deep;
  r.y0_oracle = oracle_sol.y0;
  r.abs_gap = std::abs(y0_deep - oracle_sol.y0);
  const double scale = std::max(std::abs(y0_deep), std::abs(oracle_sol.y0));
  r.rel_gap = scale > 0.0 ? r.abs_gap / scale : 0.0;
  if (problem.has_analytic()) {
    const double y0 = problem.y0_reference();
    r.analytic = y0;
    r.deep_rel_error = std::abs(y0_deep - y0) / std::abs(y0);
    r.oracle_rel_error = std::abs(oracle_sol.y0 - y0) / std::abs(y0);
  }
  return r;
}

}  // namespace bsde
