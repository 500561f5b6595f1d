#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bsde/scheme.hpp"

namespace bsde {

/// Multivariate polynomial regression basis (monomials of total degree up
/// to `degree` in `dim` variables, intercept included). Kept deliberately
/// small: dim <= 3 and degree <= 4, since the oracle is a low-dimensional
/// validator, not a production solver.
struct RegressionBasis {
  int degree = 2;
  int dim = 1;

  std::int64_t n_features() const;
  std::vector<std::vector<int>> exponents() const;  // one tuple per feature
};

/// Feature matrix (paths x features) for a batch of states.
Tensor poly_features(const RegressionBasis& basis, const Tensor& x);

struct RegressionResult {
  Tensor coef;  // (features, targets)
  bool regularized = false;
};

/// Least squares via normal equations and Cholesky; a rank-deficient design
/// falls back to a ridge-regularized solve and flags it.
RegressionResult regress_conditional(const Tensor& features, const Tensor& targets);

struct OracleConfig {
  RegressionBasis basis;
  std::int64_t n_paths = 100000;
  double picard_tol = 1e-6;
  int max_sweeps = 20;
  std::uint64_t seed = 7;
  double implicit_tol = 1e-12;
  int implicit_max_iter = 60;
  bool record_inner = false;
};

struct OracleSolution {
  double y0 = 0.0;
  /// Statistical error of y0: the step-0 Monte Carlo error plus the fitted
  /// conditional expectations' leverage-propagated errors, in quadrature.
  double y0_se = 0.0;
  std::vector<double> z0;              // Z at the (deterministic) initial state
  std::vector<Tensor> y_coef;          // per-step value-function coefficients
  std::vector<Tensor> z_coef;          // per-step Z coefficients (features x d)
  std::vector<Tensor> x_lo, x_hi;          // per-step fitted state range (clamped eval)
  std::vector<Tensor> x_shift, x_scale;    // per-step feature standardization
  std::vector<double> sweep_residuals;  // outer Picard sup-change history
  std::vector<std::vector<double>> inner_history;  // per step, last sweep
  int sweeps_used = 0;
  bool converged = false;
  bool any_regularized = false;
  std::int64_t n_paths = 0;
};

/// Implicit discrete-time scheme solved by least-squares Monte Carlo:
/// forward paths are simulated with the current value functional (outer
/// Picard sweeps handle the forward-backward coupling), Z comes from the
/// regression of Y_{i+1} dW_i / h on the state, and each step's implicit Y
/// equation is solved by an inner fixed-point iteration, a contraction for
/// h < 1/sqrt(K). Throws on Picard non-convergence, with the residual
/// history in the message.
OracleSolution lsmc_implicit_solve(const FbsdeProblem& problem, const TimeGrid& grid,
                                   const OracleConfig& cfg);

struct CrossCheckReport {
  double y0_deep;
  double y0_oracle;
  double abs_gap;
  double rel_gap;
  std::optional<double> analytic;
  std::optional<double> deep_rel_error;
  std::optional<double> oracle_rel_error;
};

CrossCheckReport oracle_cross_check(const FbsdeProblem& problem, double y0_deep,
                                    const OracleSolution& oracle_sol);

}  // namespace bsde
