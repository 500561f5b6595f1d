#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bsde/network.hpp"
#include "bsde/optimizer.hpp"
#include "bsde/problem.hpp"
#include "bsde/rng.hpp"

namespace bsde {

/// Uniform partition of [0, T] into N steps of size h = T/N.
struct TimeGrid {
  std::int64_t N = 1;
  double T = 1.0;
  double h = 1.0;

  static TimeGrid uniform(double T, std::int64_t N) {
    if (N < 1 || !(T > 0.0)) throw std::invalid_argument("TimeGrid: need N >= 1 and T > 0");
    return TimeGrid{N, T, T / static_cast<double>(N)};
  }
  double knot(std::int64_t i) const { return i == N ? T : h * static_cast<double>(i); }
};

enum class InputLayout { xy, x_only };

/// Trainable scheme state: the initial-value parameter mu0 (a scalar, since
/// xi is deterministic here) and one subnet per time step mapping the state
/// (and optionally the current value) to Z.
struct SolverPolicy {
  Tensor mu0;  // (1,1)
  std::vector<SubnetParams> subnets;
  InputLayout layout = InputLayout::xy;
};

SolverPolicy make_policy(const FbsdeProblem& problem, const TimeGrid& grid, InputLayout layout,
                         GaussianStream& init_rng, InitScheme scheme, double mu0_lo,
                         double mu0_hi, bool batchnorm = true);

/// Trainable tensors of a policy in canonical order (mu0, then subnets in
/// step order, each layer W, b, gamma, beta). rollout binds tape leaves in
/// this same order.
std::vector<ParamRef> trainable_params(SolverPolicy& policy);

struct PathBatch {
  std::int64_t batch = 0;
  std::vector<Tensor> X;   // N+1 tensors (B,m), when kept
  std::vector<Tensor> Y;   // N+1 tensors (B,1), when kept
  std::vector<Tensor> Z;   // N tensors (B,d), when kept
  std::vector<Tensor> dW;  // N tensors (B,d), when kept
  std::vector<Tensor> F;   // N tensors (B,1) of driver values, when kept
  Tensor terminal_residual;  // (B,1), always: g(X_N) - Y_N
};

struct RolloutOptions {
  RunMode mode = RunMode::eval;
  bool update_running_stats = false;
  bool keep_paths = false;
};

struct Rollout {
  Var residual;  // (B,1) on the tape
  Var loss;      // (1,1) on the tape: mean |g(X_N) - Y_N|^2
  PathBatch paths;
};

struct RolloutDiverged : std::runtime_error {
  std::int64_t step;
  explicit RolloutDiverged(std::int64_t i)
      : std::runtime_error("rollout diverged at step " + std::to_string(i)), step(i) {}
};

/// Euler scheme over the grid: X and Y advance with the same Brownian
/// increments, Z_i comes from subnet i applied to (X_i, Y_i) or X_i alone.
/// In train mode the whole rollout is recorded for differentiation through
/// every subnet and mu0. Non-finite state aborts with the step index.
Rollout rollout(const FbsdeProblem& problem, const TimeGrid& grid, SolverPolicy& policy,
                std::int64_t batch, GaussianStream& rng, const RolloutOptions& opts, Tape& tape);

/// Mean of squared terminal residuals of a stored batch.
double objective(const PathBatch& batch);

/// Terminal-mismatch certificate: the pair (h, loss) entering the
/// a-posteriori bound C (h + loss). C is never derived from theory here;
/// when supplied it is an empirical fit and the bound is labeled as such.
struct ErrorCertificate {
  double loss = 0.0;
  double h = 0.0;
  std::optional<double> C_empirical;
  std::optional<double> bound() const {
    if (!C_empirical) return std::nullopt;
    return *C_empirical * (h + loss);
  }
};

ErrorCertificate certificate(double loss, double h,
                             std::optional<double> C_empirical = std::nullopt);

/// Smallest C with err2 <= C (h + loss) over the given (err2, h, loss)
/// triples; used to fit an empirical certificate constant on benchmarks
/// where the true solution is known.
struct CertificatePoint {
  double err2, h, loss;
};
double fit_certificate_constant(const std::vector<CertificatePoint>& points);

struct StepStatistic {
  std::int64_t step;
  double mean;
  double se;
  double z;
};

/// Per-step statistic mean(Y_{i+1} - Y_i + f_i h) over fresh eval paths.
/// The scheme makes each increment Z^T dW, so the population mean is zero
/// and reported z-scores should be O(1).
std::vector<StepStatistic> martingale_residual_test(const FbsdeProblem& problem,
                                                    const TimeGrid& grid, SolverPolicy& policy,
                                                    std::int64_t n_paths, std::uint64_t seed);

struct Lemma2Result {
  double lhs, lhs_se;
  double rhs, rhs_se;
  double unweighted, unweighted_se;
  double analytic;
  bool pass;
};

/// Monte Carlo check of the martingale-representation identity
/// E[Q (W_{s2}-W_{s1}) | F_{s1}] = E[int_{s1}^{s2} H_s ds | F_{s1}]
/// for Q = W_{s2}^2, H = 2W. Both sides are weighted by the F_{s1}-test
/// function W_{s1} and compared to the closed-form Gaussian moment
/// 2 s1 (s2 - s1); the unweighted statistic is compared to 0. The time
/// integral is sampled exactly through the Brownian-bridge area, so the
/// oracle has no discretization bias. Pass means within 4 standard errors.
Lemma2Result lemma2_statistical_check(GaussianStream& rng, std::int64_t n_samples, double s1,
                                      double s2);

/// Debug dump: one row per path per step (path, i, t, X..., Y, Z...).
void export_paths_csv(const PathBatch& paths, const TimeGrid& grid, const std::string& file);

}  // namespace bsde
