#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bsde/oracle.hpp"

using namespace bsde;

TEST_CASE("polynomial basis sizes and features") {
  CHECK(RegressionBasis{3, 1}.n_features() == 4);
  CHECK(RegressionBasis{2, 2}.n_features() == 6);   // C(4,2)
  CHECK(RegressionBasis{4, 3}.n_features() == 35);  // C(7,4)
  CHECK_THROWS_AS((RegressionBasis{2, 5}.n_features()), std::invalid_argument);
  CHECK_THROWS_AS((RegressionBasis{7, 1}.n_features()), std::invalid_argument);

  RegressionBasis b{2, 2};
  Tensor x(1, 2, {2.0, 3.0});
  Tensor f = poly_features(b, x);
  // Degree-ordered monomials: 1, x0, x1, x0^2, x0 x1, x1^2.
  CHECK(f.data == std::vector<double>{1.0, 2.0, 3.0, 4.0, 6.0, 9.0});
}

TEST_CASE("conditional regression on constants, linear and quadratic targets") {
  GaussianStream rng(3);
  const std::int64_t n = 4000;
  Tensor x = rng.sample(n, 1);

  RegressionBasis basis{2, 1};
  Tensor f = poly_features(basis, x);

  // Constant target: intercept c, other coefficients 0.
  RegressionResult rc = regress_conditional(f, Tensor::full(n, 1, 2.5));
  CHECK(!rc.regularized);
  CHECK(rc.coef.at(0, 0) == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(std::abs(rc.coef.at(1, 0)) <= 1e-10);
  CHECK(std::abs(rc.coef.at(2, 0)) <= 1e-10);

  // Exactly linear target: exact recovery.
  Tensor lin(n, 1);
  for (std::int64_t i = 0; i < n; ++i) lin.at(i, 0) = 1.5 - 0.7 * x.at(i, 0);
  RegressionResult rl = regress_conditional(f, lin);
  CHECK(rl.coef.at(0, 0) == doctest::Approx(1.5).epsilon(1e-10));
  CHECK(rl.coef.at(1, 0) == doctest::Approx(-0.7).epsilon(1e-10));

  // x^2 with a degree-2 basis: coefficient of x^2 is 1.
  Tensor sq(n, 1);
  for (std::int64_t i = 0; i < n; ++i) sq.at(i, 0) = x.at(i, 0) * x.at(i, 0);
  RegressionResult rq = regress_conditional(f, sq);
  CHECK(rq.coef.at(2, 0) == doctest::Approx(1.0).epsilon(1e-8));

  CHECK_THROWS_AS(regress_conditional(Tensor(2, 3), Tensor(2, 1)), std::invalid_argument);
}

TEST_CASE("rank-deficient designs fall back to a regularized solve") {
  const std::int64_t n = 100;
  Tensor f(n, 3);
  GaussianStream rng(5);
  for (std::int64_t i = 0; i < n; ++i) {
    f.at(i, 0) = 1.0;
    f.at(i, 1) = rng.next();
    f.at(i, 2) = f.at(i, 1);  // duplicated column
  }
  Tensor y = rng.sample(n, 1);
  RegressionResult r = regress_conditional(f, y);
  CHECK(r.regularized);
  CHECK(r.coef.all_finite());
}

TEST_CASE("oracle solves linear1d to its closed form") {
  FbsdeProblem p = builtin_problem("linear1d", 1, {}, 1.0);
  TimeGrid grid = TimeGrid::uniform(p.horizon, 10);
  OracleConfig cfg;
  cfg.basis = {1, 1};
  cfg.n_paths = 100000;
  cfg.seed = 11;
  OracleSolution sol = lsmc_implicit_solve(p, grid, cfg);
  CHECK(sol.converged);
  CHECK(sol.sweeps_used == 2);  // decoupled forward: second sweep confirms
  CHECK(std::abs(sol.y0 - 1.0) <= 3.0 * sol.y0_se);
  CHECK(sol.y0_se < 0.02);
  // Z is identically 1: the fitted per-step Z function at the initial state
  // (coefficients live in the per-step standardized basis).
  for (std::size_t i = 0; i < sol.z_coef.size(); ++i) {
    const Tensor& zc = sol.z_coef[i];
    double z_at_xi = zc.at(0, 0);
    if (zc.rows > 1) {
      const double zstd = (1.0 - sol.x_shift[i].at(0, 0)) / sol.x_scale[i].at(0, 0);
      z_at_xi += zc.at(1, 0) * zstd;
    }
    CHECK(z_at_xi == doctest::Approx(1.0).epsilon(0.02));
  }
}

TEST_CASE("oracle error shrinks like one over sqrt paths") {
  FbsdeProblem p = builtin_problem("linear1d", 1, {}, 1.0);
  TimeGrid grid = TimeGrid::uniform(p.horizon, 5);
  auto mean_abs_err = [&](std::int64_t n_paths) {
    double s = 0.0;
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
      OracleConfig cfg;
      cfg.basis = {1, 1};
      cfg.n_paths = n_paths;
      cfg.seed = seed * 7919;
      s += std::abs(lsmc_implicit_solve(p, grid, cfg).y0 - 1.0);
    }
    return s / 8.0;
  };
  const double e1 = mean_abs_err(2000);
  const double e2 = mean_abs_err(8000);
  const double e3 = mean_abs_err(32000);
  // Quadrupling the paths roughly halves the error (within a factor-2 band).
  CHECK(e2 / e1 <= 1.0);
  CHECK(e2 / e1 >= 0.25 / 2.0);
  CHECK(e3 / e2 <= 1.0);
  CHECK(e3 / e2 >= 0.25 / 2.0);
}

TEST_CASE("oracle solves one-dimensional example2 within one percent") {
  FbsdeProblem p = builtin_problem("example2", 1);
  TimeGrid grid = TimeGrid::uniform(p.horizon, 40);
  OracleConfig cfg;
  cfg.basis = {3, 1};
  cfg.n_paths = 100000;
  cfg.seed = 13;
  cfg.record_inner = true;
  OracleSolution sol = lsmc_implicit_solve(p, grid, cfg);
  CHECK(sol.converged);
  const double analytic = p.y0_reference();  // exp(-0.1) * 0.1 * sin(pi/2)
  CHECK(analytic == doctest::Approx(std::exp(-0.1) * 0.1));
  CHECK(std::abs(sol.y0 - analytic) / analytic <= 0.01);

  // Inner fixed-point iteration contracts fast (factor <= sqrt(K) h).
  for (const auto& hist : sol.inner_history) {
    for (std::size_t k = 1; k < hist.size(); ++k) {
      if (hist[k - 1] <= 1e-14) break;
      CHECK(hist[k] <= 0.5 * hist[k - 1]);
    }
  }

  // Halving h does not worsen the error beyond statistical noise.
  TimeGrid coarse = TimeGrid::uniform(p.horizon, 20);
  OracleSolution sol_coarse = lsmc_implicit_solve(p, coarse, cfg);
  const double err_fine = std::abs(sol.y0 - analytic);
  const double err_coarse = std::abs(sol_coarse.y0 - analytic);
  CHECK(err_fine <= err_coarse + 4.0 * (sol.y0_se + sol_coarse.y0_se));
}

TEST_CASE("picard failure reports the residual history") {
  FbsdeProblem p = builtin_problem("example2", 1);
  TimeGrid grid = TimeGrid::uniform(p.horizon, 10);
  OracleConfig cfg;
  cfg.basis = {2, 1};
  cfg.n_paths = 5000;
  cfg.max_sweeps = 1;  // coupled problem cannot settle in one sweep
  try {
    lsmc_implicit_solve(p, grid, cfg);
    CHECK(false);
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("sup-changes") != std::string::npos);
  }
}

TEST_CASE("oracle preconditions") {
  FbsdeProblem p = builtin_problem("linear1d", 1, {}, 1.0);
  TimeGrid grid = TimeGrid::uniform(p.horizon, 5);
  OracleConfig cfg;
  cfg.basis = {4, 1};
  cfg.n_paths = 10;  // far below 10x features
  CHECK_THROWS_AS(lsmc_implicit_solve(p, grid, cfg), std::invalid_argument);
  FbsdeProblem wide = builtin_problem("example2", 4);
  OracleConfig cfg2;
  cfg2.n_paths = 10000;
  CHECK_THROWS_AS(lsmc_implicit_solve(wide, grid, cfg2), std::invalid_argument);
}

TEST_CASE("cross-check report") {
  FbsdeProblem p = builtin_problem("linear1d", 1, {}, 1.0);
  TimeGrid grid = TimeGrid::uniform(p.horizon, 10);
  OracleConfig cfg;
  cfg.basis = {1, 1};
  cfg.n_paths = 50000;
  cfg.seed = 17;
  OracleSolution sol = lsmc_implicit_solve(p, grid, cfg);

  // Both solvers at the closed form: discrepancy within oracle noise.
  CrossCheckReport exact = oracle_cross_check(p, 1.0, sol);
  CHECK(exact.abs_gap <= 4.0 * sol.y0_se);
  CHECK(exact.analytic.has_value());
  CHECK(*exact.analytic == doctest::Approx(1.0));

  // A policy whose initial value is off by one shows up as a unit gap.
  CrossCheckReport off = oracle_cross_check(p, 2.0, sol);
  CHECK(off.abs_gap == doctest::Approx(1.0).epsilon(0.02));
  CHECK(*off.deep_rel_error == doctest::Approx(1.0).epsilon(0.01));
}
