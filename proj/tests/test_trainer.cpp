#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bsde/trainer.hpp"

using namespace bsde;

namespace {

FbsdeProblem zero_problem() {
  FbsdeProblem p;
  p.name = "zero";
  p.dim_x = 1;
  p.dim_w = 1;
  p.horizon = 1.0;
  p.initial = {0.0};
  p.diffusion_apply = [](double, Var, Var, Var w) { return affine(w, 0.0, 0.0); };
  p.terminal = [](Var x) { return affine(x, 0.0, 0.0); };
  p.analytic_u = [](double, const Tensor& x) { return Tensor::zeros(x.rows, 1); };
  return p;
}

TrainConfig smoke_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.iterations = 500;
  cfg.batch_size = 64;
  cfg.validation_paths = 256;
  cfg.lr = {1e-2, 1e-3, 100, 500};
  cfg.seed = seed;
  cfg.mu0_lo = 0.0;
  cfg.mu0_hi = 2.0;
  cfg.batchnorm = false;  // the pipeline checks need no normalization noise
  return cfg;
}

}  // namespace

TEST_CASE("config validation names the offending field") {
  TrainConfig cfg = smoke_config(1);
  cfg.batch_size = 1;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("batch_size"), std::invalid_argument);
  cfg = smoke_config(1);
  cfg.lr.end_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = smoke_config(1);
  cfg.mu0_lo = 2.0;
  cfg.mu0_hi = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("training linear1d reaches the closed-form solution") {
  FbsdeProblem p = builtin_problem("linear1d", 1, {}, 1.0);
  TimeGrid grid = TimeGrid::uniform(p.horizon, 10);
  auto [policy, report] = train(p, grid, smoke_config(3));
  CHECK(!report.diverged);
  CHECK(report.final_record().val_loss <= 1e-3);
  CHECK(std::abs(policy.mu0.value() - 1.0) <= 0.01);
  CHECK(report.final_record().rel_error <= 0.01);
  CHECK(report.final_certificate.h == doctest::Approx(grid.h));
  // Checkpoints are strictly increasing in step.
  for (std::size_t i = 1; i < report.records.size(); ++i)
    CHECK(report.records[i].step > report.records[i - 1].step);
}

TEST_CASE("training the zero problem drives mu0 to zero") {
  FbsdeProblem p = zero_problem();
  TimeGrid grid = TimeGrid::uniform(p.horizon, 5);
  TrainConfig cfg = smoke_config(5);
  cfg.iterations = 400;
  cfg.mu0_lo = 0.8;
  cfg.mu0_hi = 1.2;  // init away from the solution
  auto [policy, report] = train(p, grid, cfg);
  CHECK(std::abs(policy.mu0.value()) <= 0.01);
  CHECK(report.final_record().val_loss <= 1e-4);
  CHECK(report.skipped_steps == 0);
  // Loss is non-increasing after the first 100 steps, up to tolerance.
  double prev = 0.0;
  bool started = false;
  for (const auto& rec : report.records) {
    if (rec.step < 100) continue;
    if (started) CHECK(rec.val_loss <= prev + 1e-8);
    prev = rec.val_loss;
    started = true;
  }
}

TEST_CASE("validate is deterministic and quadratic around the optimum") {
  FbsdeProblem p = zero_problem();
  TimeGrid grid = TimeGrid::uniform(p.horizon, 5);
  GaussianStream rng(7);
  SolverPolicy policy = make_policy(p, grid, InputLayout::xy, rng, InitScheme::uniform, 0.0, 0.0);
  // Zero out the subnets so Z contributes nothing on the zero problem.
  for (auto& net : policy.subnets)
    for (auto& l : net.layers) {
      for (auto& w : l.W.data) w = 0.0;
      for (auto& g : l.bn.gamma.data) g = 0.0;
      for (auto& b : l.bn.beta.data) b = 0.0;
    }
  policy.mu0 = Tensor::scalar(0.0);
  ValidationResult v0 = validate(p, grid, policy, 256, 11);
  CHECK(v0.loss == 0.0);
  policy.mu0 = Tensor::scalar(0.1);
  ValidationResult v1 = validate(p, grid, policy, 256, 11);
  CHECK(v1.loss == doctest::Approx(0.01).epsilon(1e-12));  // +0.1 costs exactly 0.01
  ValidationResult v2 = validate(p, grid, policy, 256, 11);
  CHECK(v1.loss == v2.loss);
  CHECK(v1.y0_estimate == 0.1);
}

TEST_CASE("train is bit-reproducible for a fixed seed") {
  FbsdeProblem p = builtin_problem("linear1d", 1, {}, 1.0);
  TimeGrid grid = TimeGrid::uniform(p.horizon, 6);
  TrainConfig cfg = smoke_config(13);
  cfg.iterations = 120;
  cfg.deterministic = true;
  auto [policy_a, report_a] = train(p, grid, cfg);
  auto [policy_b, report_b] = train(p, grid, cfg);
  CHECK(policy_a.mu0.value() == policy_b.mu0.value());
  REQUIRE(report_a.records.size() == report_b.records.size());
  for (std::size_t i = 0; i < report_a.records.size(); ++i) {
    CHECK(report_a.records[i].val_loss == report_b.records[i].val_loss);
    CHECK(report_a.records[i].y0_estimate == report_b.records[i].y0_estimate);
    CHECK(report_a.records[i].wall_s == 0.0);
  }
}

TEST_CASE("multi_run aggregates checkpoints") {
  FbsdeProblem p = builtin_problem("linear1d", 1, {}, 1.0);
  TimeGrid grid = TimeGrid::uniform(p.horizon, 6);
  TrainConfig cfg = smoke_config(17);
  cfg.iterations = 300;

  MultiRunReport single = multi_run(p, grid, cfg, 1);
  CHECK(single.runs.size() == 1);
  for (std::size_t c = 0; c < single.aggregate.size(); ++c) {
    CHECK(single.aggregate[c].val_loss_mean == single.runs[0].records[c].val_loss);
    CHECK(single.aggregate[c].val_loss_sd == 0.0);  // single run: zero spread
  }

  MultiRunReport rep = multi_run(p, grid, cfg, 3);
  CHECK(rep.runs.size() == 3);
  // Per-run seeds follow seed + r * 10007.
  CHECK(rep.runs[0].seed == 17);
  CHECK(rep.runs[1].seed == 17 + 10007);
  CHECK(rep.runs[2].seed == 17 + 2 * 10007);
  CHECK(rep.final_rel_error_mean <= 0.02);
  CHECK(rep.aggregate.back().rel_error_sd >= 0.0);
}

TEST_CASE("convergence study on linear1d sees no discretization error") {
  FbsdeProblem p = builtin_problem("linear1d", 1, {}, 1.0);
  TrainConfig cfg = smoke_config(19);
  cfg.iterations = 400;
  auto rows = convergence_study(p, cfg, {2, 4, 8}, 1);
  REQUIRE(rows.size() == 3);
  for (const auto& row : rows) {
    CHECK(row.h == doctest::Approx(1.0 / static_cast<double>(row.N)));
    CHECK(row.mean_rel_error <= 0.01);  // Euler is exact for dX = dW, f = 0
  }
  CHECK_THROWS_AS(convergence_study(p, cfg, {}, 1), std::invalid_argument);
}

TEST_CASE("wall-time guard aborts gracefully with a partial report") {
  FbsdeProblem p = builtin_problem("linear1d", 1, {}, 1.0);
  TimeGrid grid = TimeGrid::uniform(p.horizon, 10);
  TrainConfig cfg = smoke_config(23);
  cfg.iterations = 2000000;  // far beyond the budget
  cfg.max_seconds = 0.2;
  auto [policy, report] = train(p, grid, cfg);
  CHECK(report.hit_time_limit);
  CHECK(report.records.size() >= 1);
  CHECK(report.records.back().step <= cfg.iterations);
}
