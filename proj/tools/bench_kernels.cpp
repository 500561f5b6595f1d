// Timing comparison of the serial reference kernels against the OpenMP
// kernels, on shapes representative of training (batch x width matmuls,
// batchnorm reductions, a full train-mode rollout step).

#include <chrono>
#include <cstdio>
#include <functional>

#include "bsde/kernels.hpp"
#include "bsde/rng.hpp"
#include "bsde/scheme.hpp"

using namespace bsde;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warmup
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void row(const char* name, double ref_ms, double par_ms) {
  std::printf("%-28s %10.3f %10.3f %8.2fx\n", name, ref_ms, par_ms,
              par_ms > 0 ? ref_ms / par_ms : 0.0);
}

}  // namespace

int main() {
  std::printf("threads: %d (openmp %s)\n\n", kernels::max_threads(),
              kernels::openmp_compiled() ? "on" : "off");
  std::printf("%-28s %10s %10s %8s\n", "kernel", "serial ms", "omp ms", "speedup");

  GaussianStream rng(42);
  const Tensor a = rng.sample(64, 110);
  const Tensor b = rng.sample(110, 110);
  const Tensor big = rng.sample(4096, 128);

  row("matmul 64x110x110",
      time_ms([&] { kernels::ref::matmul(a, b); }, 200),
      time_ms([&] { kernels::par::matmul(a, b); }, 200));
  row("matmul_tn 64x110 -> 110x110",
      time_ms([&] { kernels::ref::matmul_tn(a, a); }, 200),
      time_ms([&] { kernels::par::matmul_tn(a, a); }, 200));
  row("ewise mul 4096x128",
      time_ms([&] { kernels::ref::ewise(kernels::BinOp::mul, big, big, kernels::Bcast::same); }, 200),
      time_ms([&] { kernels::par::ewise(kernels::BinOp::mul, big, big, kernels::Bcast::same); }, 200));
  row("map exp 4096x128",
      time_ms([&] { kernels::ref::map(kernels::UnOp::exp_fn, big); }, 100),
      time_ms([&] { kernels::par::map(kernels::UnOp::exp_fn, big); }, 100));
  row("colsum 4096x128",
      time_ms([&] { kernels::ref::colsum(big); }, 200),
      time_ms([&] { kernels::par::colsum(big); }, 200));
  row("sum_all 4096x128",
      time_ms([&] { kernels::ref::sum_all(big); }, 200),
      time_ms([&] { kernels::par::sum_all(big); }, 200));

  // Whole train-mode rollout on a desk-size instance.
  FbsdeProblem problem = builtin_problem("example2", 10);
  TimeGrid grid = TimeGrid::uniform(problem.horizon, 40);
  GaussianStream init(1);
  SolverPolicy policy =
      make_policy(problem, grid, InputLayout::xy, init, InitScheme::uniform, 0.0, 1.0);
  auto rollout_once = [&] {
    GaussianStream paths(7);
    Tape tape;
    RolloutOptions opts;
    opts.mode = RunMode::train;
    Rollout r = rollout(problem, grid, policy, 64, paths, opts, tape);
    tape.backward(r.loss);
  };
  kernels::set_backend(kernels::Backend::serial);
  const double roll_ref = time_ms(rollout_once, 5);
  kernels::set_backend(kernels::Backend::openmp);
  const double roll_par = time_ms(rollout_once, 5);
  row("train rollout+backward d=10", roll_ref, roll_par);
  return 0;
}
