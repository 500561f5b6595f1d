#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bsde/scheme.hpp"

namespace bsde {

struct TrainConfig {
  std::int64_t iterations = 2000;
  std::int64_t batch_size = 64;
  std::int64_t validation_paths = 256;
  LrSchedule lr;  // total_steps is forced to iterations
  std::uint64_t seed = 1;
  double mu0_lo = 0.0;
  double mu0_hi = 1.0;
  InputLayout layout = InputLayout::xy;
  InitScheme init = InitScheme::uniform;
  bool batchnorm = true;
  AdamConfig adam;
  std::int64_t checkpoint_every = 100;
  double max_seconds = 0.0;    // 0 = no wall-time guard
  bool deterministic = false;  // report wall_s as 0 so artifacts are byte-stable

  void validate() const;
};

struct CheckpointRecord {
  std::int64_t step;
  double lr;
  double val_loss;
  double y0_estimate;
  double rel_error;  // NaN when the problem has no analytic solution
  double wall_s;
};

struct TrainingReport {
  std::vector<CheckpointRecord> records;
  ErrorCertificate final_certificate;
  std::uint64_t seed = 0;
  double y0_reference = 0.0;
  bool has_reference = false;
  bool diverged = false;
  bool hit_time_limit = false;
  std::int64_t skipped_steps = 0;  // diverged rollouts whose update was dropped

  const CheckpointRecord& final_record() const { return records.back(); }
};

struct ValidationResult {
  double loss;
  double y0_estimate;
  double rel_error;  // NaN without an analytic reference
};

/// Deterministic eval-mode rollout on the fixed validation stream derived
/// from `seed`; a pure function of (policy, seed).
ValidationResult validate(const FbsdeProblem& problem, const TimeGrid& grid, SolverPolicy& policy,
                          std::int64_t n_paths, std::uint64_t seed);

/// Stochastic-optimization loop: sample a fresh batch, rollout in train
/// mode, backpropagate the terminal mismatch, Adam-update every subnet and
/// mu0, with validation checkpoints on a fixed cadence. A non-finite
/// validation loss aborts with the partial report flagged as diverged.
std::pair<SolverPolicy, TrainingReport> train(const FbsdeProblem& problem, const TimeGrid& grid,
                                              const TrainConfig& cfg);

struct AggregateRecord {
  std::int64_t step;
  double lr;
  double val_loss_mean, val_loss_sd;
  double rel_error_mean, rel_error_sd;
  double y0_mean, y0_sd;
};

struct MultiRunReport {
  std::vector<TrainingReport> runs;
  std::vector<AggregateRecord> aggregate;  // per checkpoint, mean +- SD across runs
  double final_rel_error_mean = 0.0;
  double final_rel_error_sd = 0.0;
};

/// Runs n_runs independent trainings with per-run seeds cfg.seed + r*10007
/// and aggregates checkpoints. Run r's failure propagates with its index.
MultiRunReport multi_run(const FbsdeProblem& problem, const TimeGrid& grid, const TrainConfig& cfg,
                         int n_runs, std::vector<SolverPolicy>* policies_out = nullptr);

struct ConvergenceRow {
  std::int64_t N;
  double h;
  double mean_rel_error;
  double sd_rel_error;
};

/// Trains one policy per grid size with otherwise identical configuration
/// and reports final relative error against N (the step-size study).
std::vector<ConvergenceRow> convergence_study(const FbsdeProblem& problem, const TrainConfig& cfg,
                                              const std::vector<std::int64_t>& N_list, int n_runs);

}  // namespace bsde
