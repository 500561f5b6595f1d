#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bsde/tape.hpp"
#include "bsde/tensor.hpp"

namespace bsde {

/// A coupled FBSDE: forward state X in R^m driven by an R^d Brownian motion,
/// scalar backward value Y with control Z in R^d. Coefficients are written
/// against the tape so rollouts differentiate through them end to end; the
/// diffusion is exposed only through its action on a vector (both built-in
/// benchmarks are diagonal). Batched arguments: x (B,m), y (B,1), z (B,d),
/// w (B,d); drift returns (B,m), diffusion_apply (B,m), driver and terminal
/// (B,1). Null drift/driver mean identically zero.
struct FbsdeProblem {
  std::string name;
  std::int64_t dim_x = 1;  // m
  std::int64_t dim_w = 1;  // d
  double horizon = 1.0;    // T
  std::vector<double> initial;  // deterministic xi

  std::function<Var(double t, Var x, Var y)> drift;
  std::function<Var(double t, Var x, Var y, Var w)> diffusion_apply;
  std::function<Var(double t, Var x, Var y, Var z)> driver;
  std::function<Var(Var x)> terminal;

  /// Closed-form u(t, x) evaluated pointwise on a batch, when known.
  std::function<Tensor(double t, const Tensor& x)> analytic_u;

  bool has_analytic() const { return static_cast<bool>(analytic_u); }
  double y0_reference() const;
};

/// Lipschitz/growth constants of a problem, as supplied by the user for the
/// coupling audit. k_b and k_f may be negative (one-sided monotonicity); the
/// rest are nonnegative with K an upper bound for all of them.
struct ProblemConstants {
  double k_b = 0.0;
  double k_f = 0.0;
  double K = 0.0;
  double b_y = 0.0;
  double sigma_x = 0.0;
  double sigma_y = 0.0;
  double f_x = 0.0;
  double f_z = 0.0;
  double g_x = 0.0;
  double b_0 = 0.0;
  double sigma_0 = 0.0;
  double f_0 = 0.0;
  double g_0 = 0.0;
  double T = 1.0;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct Example2Params {
  double sigma = 0.3;
  double r = 0.1;
  double D = 0.1;
};

/// Built-in benchmark problems.
///  - example1: dimension-lifted scalar benchmark with fully coupled drift,
///    diffusion and driver; u(t,x) = exp(-|x|^2/(d(t+5))), T = 5, xi = 1.
///  - example2: sine-terminal benchmark, forward driven by sigma*Y;
///    u(t,x) = exp(-r(T-t)) D sum_j sin(x_j), T = 1, xi = pi/2.
///  - linear1d: dX = dW, f = 0, g(x) = x, so Y_t = X_t and Z = 1 in closed
///    form; used as a zero-model-error pipeline check.
FbsdeProblem builtin_problem(const std::string& name, std::int64_t dim,
                             const Example2Params& p2 = {}, double linear1d_xi = 1.0);

/// Builds a diffusion action from a constant dense matrix: w -> sigma * w.
std::function<Var(double, Var, Var, Var)> diffusion_apply_const_matrix(Tensor sigma);

struct CoefficientBatch {
  Tensor drift;      // (B, m)
  Tensor diffusion;  // (B, m), sigma applied to w
  Tensor driver;     // (B, 1)
};

/// Plain batched evaluation of the coefficients (no gradients); rejects
/// non-finite outputs with the offending time echoed.
CoefficientBatch eval_coefficients(const FbsdeProblem& problem, double t, const Tensor& x,
                                   const Tensor& y, const Tensor& z, const Tensor& w);

/// Pointwise u(t, x) for problems with a known solution; (B,1) output.
Tensor analytic_reference(const FbsdeProblem& problem, double t, const Tensor& x);

}  // namespace bsde
