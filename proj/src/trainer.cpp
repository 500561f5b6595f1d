#include "bsde/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace bsde {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

enum SeedTag : std::uint64_t { kInitTag = 1, kTrainTag = 2, kValidationTag = 3 };

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void TrainConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("TrainConfig: iterations must be >= 1");
  if (batch_size < 2) throw std::invalid_argument("TrainConfig: batch_size must be >= 2");
  if (validation_paths < 2)
    throw std::invalid_argument("TrainConfig: validation_paths must be >= 2");
  if (checkpoint_every < 1) throw std::invalid_argument("TrainConfig: checkpoint_every >= 1");
  if (!(mu0_hi >= mu0_lo)) throw std::invalid_argument("TrainConfig: mu0 interval is empty");
  if (!(lr.start_rate >= lr.end_rate) || !(lr.end_rate > 0.0))
    throw std::invalid_argument("TrainConfig: need lr start >= end > 0");
}

ValidationResult validate(const FbsdeProblem& problem, const TimeGrid& grid, SolverPolicy& policy,
                          std::int64_t n_paths, std::uint64_t seed) {
  GaussianStream rng(derive_seed(seed, kValidationTag));
  const std::int64_t chunk = 64;
  std::int64_t done = 0;
  double sum_sq = 0.0;
  RolloutOptions opts;  // eval, no running-stat update, no path storage
  while (done < n_paths) {
    const std::int64_t b = std::min(chunk, n_paths - done);
    Tape tape;
    Rollout r = rollout(problem, grid, policy, b, rng, opts, tape);
    for (double v : r.paths.terminal_residual.data) sum_sq += v * v;
    done += b;
  }
  ValidationResult res;
  res.loss = sum_sq / static_cast<double>(n_paths);
  res.y0_estimate = policy.mu0.value();
  res.rel_error = kNan;
  if (problem.has_analytic()) {
    const double y0 = problem.y0_reference();
    res.rel_error = std::abs(res.y0_estimate - y0) / std::abs(y0);
  }
  return res;
}

std::pair<SolverPolicy, TrainingReport> train(const FbsdeProblem& problem, const TimeGrid& grid,
                                              const TrainConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  GaussianStream init_rng(derive_seed(cfg.seed, kInitTag));
  GaussianStream path_rng(derive_seed(cfg.seed, kTrainTag));
  SolverPolicy policy = make_policy(problem, grid, cfg.layout, init_rng, cfg.init, cfg.mu0_lo,
                                    cfg.mu0_hi, cfg.batchnorm);

  std::vector<ParamRef> params = trainable_params(policy);
  AdamState adam;
  adam.init(params, cfg.adam);

  LrSchedule schedule = cfg.lr;
  schedule.total_steps = cfg.iterations;

  TrainingReport report;
  report.seed = cfg.seed;
  report.has_reference = problem.has_analytic();
  report.y0_reference = report.has_reference ? problem.y0_reference() : kNan;

  auto checkpoint = [&](std::int64_t step) {
    ValidationResult v = validate(problem, grid, policy, cfg.validation_paths, cfg.seed);
    report.records.push_back({step, lr_at(schedule, step), v.loss, v.y0_estimate, v.rel_error,
                              cfg.deterministic ? 0.0 : elapsed_s(t0)});
    return v;
  };

  bool names_checked = false;
  for (std::int64_t step = 0; step < cfg.iterations; ++step) {
    if (step % cfg.checkpoint_every == 0) {
      ValidationResult v = checkpoint(step);
      if (!std::isfinite(v.loss)) {
        report.diverged = true;
        report.final_certificate = certificate(0.0, grid.h);
        report.final_certificate.loss = v.loss;
        return {std::move(policy), std::move(report)};
      }
    }
    if (cfg.max_seconds > 0.0 && elapsed_s(t0) > cfg.max_seconds) {
      report.hit_time_limit = true;
      break;
    }

    RolloutOptions opts;
    opts.mode = RunMode::train;
    opts.update_running_stats = true;
    try {
      Tape tape;
      Rollout r = rollout(problem, grid, policy, cfg.batch_size, path_rng, opts, tape);
      if (!std::isfinite(r.loss.val().value())) {
        ++report.skipped_steps;
        continue;
      }
      GradientMap grads = tape.backward(r.loss);
      if (!names_checked) {
        // The tape binds leaves in the canonical trainable_params order;
        // verify once per run.
        if (grads.names.size() != params.size())
          throw std::logic_error("train: leaf count != parameter count");
        for (std::size_t i = 0; i < params.size(); ++i)
          if (grads.names[i] != params[i].name)
            throw std::logic_error("train: leaf order mismatch at " + params[i].name);
        names_checked = true;
      }
      adam_step(adam, params, grads, lr_at(schedule, step));
    } catch (const RolloutDiverged&) {
      ++report.skipped_steps;
      continue;
    }
  }

  ValidationResult final_v = checkpoint(cfg.iterations);
  if (!std::isfinite(final_v.loss)) report.diverged = true;
  report.final_certificate = certificate(std::isfinite(final_v.loss) ? final_v.loss : 0.0, grid.h);
  if (!std::isfinite(final_v.loss)) report.final_certificate.loss = final_v.loss;
  return {std::move(policy), std::move(report)};
}

MultiRunReport multi_run(const FbsdeProblem& problem, const TimeGrid& grid, const TrainConfig& cfg,
                         int n_runs, std::vector<SolverPolicy>* policies_out) {
  if (n_runs < 1) throw std::invalid_argument("multi_run: n_runs must be >= 1");
  MultiRunReport out;
  for (int r = 0; r < n_runs; ++r) {
    TrainConfig run_cfg = cfg;
    run_cfg.seed = cfg.seed + static_cast<std::uint64_t>(r) * 10007ull;
    try {
      auto [policy, report] = train(problem, grid, run_cfg);
      if (report.diverged)
        throw std::runtime_error("training diverged (non-finite validation loss)");
      out.runs.push_back(std::move(report));
      if (policies_out) policies_out->push_back(std::move(policy));
    } catch (const std::exception& e) {
      throw std::runtime_error("multi_run: run " + std::to_string(r) + " failed: " + e.what());
    }
  }

  const std::size_t n_checkpoints = out.runs.front().records.size();
  for (const auto& run : out.runs)
    if (run.records.size() != n_checkpoints)
      throw std::runtime_error("multi_run: runs produced unequal checkpoint counts");

  const double n = static_cast<double>(n_runs);
  for (std::size_t c = 0; c < n_checkpoints; ++c) {
    AggregateRecord a{};
    a.step = out.runs.front().records[c].step;
    a.lr = out.runs.front().records[c].lr;
    double sl = 0, sl2 = 0, se = 0, se2 = 0, sy = 0, sy2 = 0;
    for (const auto& run : out.runs) {
      const auto& rec = run.records[c];
      sl += rec.val_loss;
      sl2 += rec.val_loss * rec.val_loss;
      se += rec.rel_error;
      se2 += rec.rel_error * rec.rel_error;
      sy += rec.y0_estimate;
      sy2 += rec.y0_estimate * rec.y0_estimate;
    }
    auto sd = [n](double s, double s2) {
      return n > 1 ? std::sqrt(std::max(0.0, (s2 - s * s / n) / (n - 1))) : 0.0;
    };
    a.val_loss_mean = sl / n;
    a.val_loss_sd = sd(sl, sl2);
    a.rel_error_mean = se / n;
    a.rel_error_sd = sd(se, se2);
    a.y0_mean = sy / n;
    a.y0_sd = sd(sy, sy2);
    out.aggregate.push_back(a);
  }
  out.final_rel_error_mean = out.aggregate.back().rel_error_mean;
  out.final_rel_error_sd = out.aggregate.back().rel_error_sd;
  return out;
}

std::vector<ConvergenceRow> convergence_study(const FbsdeProblem& problem, const TrainConfig& cfg,
                                              const std::vector<std::int64_t>& N_list,
                                              int n_runs) {
  if (N_list.empty()) throw std::invalid_argument("convergence_study: empty N list");
  std::vector<ConvergenceRow> rows;
  for (std::int64_t N : N_list) {
    const TimeGrid grid = TimeGrid::uniform(problem.horizon, N);
    try {
      MultiRunReport rep = multi_run(problem, grid, cfg, n_runs);
      rows.push_back({N, grid.h, rep.final_rel_error_mean, rep.final_rel_error_sd});
    } catch (const std::exception& e) {
      throw std::runtime_error("convergence_study: N=" + std::to_string(N) + ": " + e.what());
    }
  }
  return rows;
}

}  // namespace bsde
