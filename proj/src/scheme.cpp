#include "bsde/scheme.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace bsde {

SolverPolicy make_policy(const FbsdeProblem& problem, const TimeGrid& grid, InputLayout layout,
                         GaussianStream& init_rng, InitScheme scheme, double mu0_lo,
                         double mu0_hi, bool batchnorm) {
  SolverPolicy p;
  p.layout = layout;
  p.mu0 = Tensor::scalar(init_rng.uniform(mu0_lo, mu0_hi));
  SubnetSpec spec = SubnetSpec::paper_default(problem.dim_w, layout == InputLayout::xy);
  spec.batchnorm = batchnorm;
  p.subnets.reserve(static_cast<std::size_t>(grid.N));
  for (std::int64_t i = 0; i < grid.N; ++i)
    p.subnets.push_back(init_subnet(spec, init_rng, scheme));
  return p;
}

std::vector<ParamRef> trainable_params(SolverPolicy& policy) {
  std::vector<ParamRef> out;
  out.push_back({&policy.mu0, "mu0"});
  for (std::size_t s = 0; s < policy.subnets.size(); ++s) {
    auto& net = policy.subnets[s];
    const std::string np = "subnet" + std::to_string(s);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      auto& layer = net.layers[l];
      const std::string lp = np + ".layer" + std::to_string(l);
      out.push_back({&layer.W, lp + ".W"});
      out.push_back({&layer.b, lp + ".b"});
      if (net.spec.batchnorm) {
        out.push_back({&layer.bn.gamma, lp + ".gamma"});
        out.push_back({&layer.bn.beta, lp + ".beta"});
      }
    }
  }
  return out;
}

Rollout rollout(const FbsdeProblem& problem, const TimeGrid& grid, SolverPolicy& policy,
                std::int64_t batch, GaussianStream& rng, const RolloutOptions& opts, Tape& tape) {
  if (opts.mode == RunMode::train && batch < 2)
    throw std::invalid_argument("rollout: train mode needs batch >= 2");
  if (static_cast<std::int64_t>(policy.subnets.size()) != grid.N)
    throw std::invalid_argument("rollout: policy has " + std::to_string(policy.subnets.size()) +
                                " subnets for a grid of " + std::to_string(grid.N) + " steps");

  const std::int64_t m = problem.dim_x, d = problem.dim_w;
  const double sqrt_h = std::sqrt(grid.h);

  Tensor xi_rows(batch, m);
  for (std::int64_t i = 0; i < batch; ++i)
    for (std::int64_t j = 0; j < m; ++j) xi_rows.at(i, j) = problem.initial[static_cast<std::size_t>(j)];

  Var mu0 = tape.leaf(policy.mu0, "mu0");
  Var x = tape.constant(std::move(xi_rows));
  Var y = add(tape.constant(Tensor::zeros(batch, 1)), mu0);

  Rollout out;
  out.paths.batch = batch;
  if (opts.keep_paths) {
    out.paths.X.push_back(x.val());
    out.paths.Y.push_back(y.val());
  }

  for (std::int64_t i = 0; i < grid.N; ++i) {
    const double t = grid.knot(i);
    Var dw = tape.constant(kernels::affine(rng.sample(batch, d), sqrt_h, 0.0));

    Var zin = policy.layout == InputLayout::xy ? concat_cols(x, y) : x;
    Var z = subnet_forward(policy.subnets[static_cast<std::size_t>(i)], zin, opts.mode,
                           opts.update_running_stats, tape, "subnet" + std::to_string(i));

    Var x_next = x;
    if (problem.drift) x_next = add(x_next, affine(problem.drift(t, x, y), grid.h, 0.0));
    x_next = add(x_next, problem.diffusion_apply(t, x, y, dw));

    Var y_next = add(y, rowsum(mul(z, dw)));
    Var f{};
    if (problem.driver) {
      f = problem.driver(t, x, y, z);
      y_next = sub(y_next, affine(f, grid.h, 0.0));
    }

    if (!x_next.val().all_finite() || !y_next.val().all_finite()) throw RolloutDiverged(i + 1);

    if (opts.keep_paths) {
      out.paths.X.push_back(x_next.val());
      out.paths.Y.push_back(y_next.val());
      out.paths.Z.push_back(z.val());
      out.paths.dW.push_back(dw.val());
      out.paths.F.push_back(problem.driver ? f.val() : Tensor::zeros(batch, 1));
    }
    x = x_next;
    y = y_next;
  }

  Var g = problem.terminal(x);
  out.residual = sub(g, y);
  out.loss = mean_all(square(out.residual));
  out.paths.terminal_residual = out.residual.val();
  return out;
}

double objective(const PathBatch& batch) {
  if (batch.terminal_residual.size() == 0) throw std::invalid_argument("objective: empty batch");
  double s = 0.0;
  for (double r : batch.terminal_residual.data) s += r * r;
  return s / static_cast<double>(batch.terminal_residual.size());
}

ErrorCertificate certificate(double loss, double h, std::optional<double> C_empirical) {
  if (loss < 0.0 || !(h > 0.0)) throw std::invalid_argument("certificate: need loss >= 0, h > 0");
  return ErrorCertificate{loss, h, C_empirical};
}

double fit_certificate_constant(const std::vector<CertificatePoint>& points) {
  if (points.empty()) throw std::invalid_argument("fit_certificate_constant: no points");
  double c = 0.0;
  for (const auto& p : points) c = std::max(c, p.err2 / (p.h + p.loss));
  return c;
}

std::vector<StepStatistic> martingale_residual_test(const FbsdeProblem& problem,
                                                    const TimeGrid& grid, SolverPolicy& policy,
                                                    std::int64_t n_paths, std::uint64_t seed) {
  GaussianStream rng(seed);
  const std::int64_t chunk = 64;
  std::vector<double> sum(static_cast<std::size_t>(grid.N), 0.0);
  std::vector<double> sumsq(static_cast<std::size_t>(grid.N), 0.0);
  std::int64_t done = 0;
  RolloutOptions opts;
  opts.mode = RunMode::eval;
  opts.keep_paths = true;
  while (done < n_paths) {
    const std::int64_t b = std::min(chunk, n_paths - done);
    Tape tape;
    Rollout r = rollout(problem, grid, policy, b, rng, opts, tape);
    for (std::int64_t i = 0; i < grid.N; ++i) {
      const auto& yi = r.paths.Y[static_cast<std::size_t>(i)];
      const auto& yi1 = r.paths.Y[static_cast<std::size_t>(i + 1)];
      const auto& fi = r.paths.F[static_cast<std::size_t>(i)];
      for (std::int64_t p = 0; p < b; ++p) {
        const double v = yi1.at(p, 0) - yi.at(p, 0) + fi.at(p, 0) * grid.h;
        sum[static_cast<std::size_t>(i)] += v;
        sumsq[static_cast<std::size_t>(i)] += v * v;
      }
    }
    done += b;
  }
  std::vector<StepStatistic> out;
  const double n = static_cast<double>(n_paths);
  for (std::int64_t i = 0; i < grid.N; ++i) {
    const double mean = sum[static_cast<std::size_t>(i)] / n;
    const double var = std::max(0.0, sumsq[static_cast<std::size_t>(i)] / n - mean * mean);
    const double se = std::sqrt(var / n);
    out.push_back({i, mean, se, se > 0.0 ? mean / se : 0.0});
  }
  return out;
}

Lemma2Result lemma2_statistical_check(GaussianStream& rng, std::int64_t n_samples, double s1,
                                      double s2) {
  if (s1 < 0.0 || s2 < s1) throw std::invalid_argument("lemma2: need 0 <= s1 <= s2");
  const double dt = s2 - s1;
  // Exact joint sampling: W1 ~ N(0,s1); W2 = W1 + sqrt(dt) g; the Brownian
  // area over [s1,s2] is dt (W1+W2)/2 plus an independent bridge term of
  // variance dt^3/12.
  double sl = 0.0, sl2 = 0.0, sr = 0.0, sr2 = 0.0, su = 0.0, su2 = 0.0;
  for (std::int64_t k = 0; k < n_samples; ++k) {
    const double w1 = std::sqrt(s1) * rng.next();
    const double delta = std::sqrt(dt) * rng.next();
    const double bridge = std::sqrt(dt * dt * dt / 12.0) * rng.next();
    const double w2 = w1 + delta;
    const double area = dt * (w1 + w2) / 2.0 + bridge;
    const double lhs = w1 * (w2 * w2) * delta;  // psi * Q * (W2 - W1)
    const double rhs = w1 * 2.0 * area;         // psi * int 2 W ds
    const double unw = (w2 * w2) * delta;
    sl += lhs;
    sl2 += lhs * lhs;
    sr += rhs;
    sr2 += rhs * rhs;
    su += unw;
    su2 += unw * unw;
  }
  const double n = static_cast<double>(n_samples);
  auto stat = [n](double s, double s2_, double& mean, double& se) {
    mean = s / n;
    const double var = std::max(0.0, s2_ / n - mean * mean);
    se = std::sqrt(var / n);
  };
  Lemma2Result r{};
  stat(sl, sl2, r.lhs, r.lhs_se);
  stat(sr, sr2, r.rhs, r.rhs_se);
  stat(su, su2, r.unweighted, r.unweighted_se);
  r.analytic = 2.0 * s1 * dt;
  const double tol = 1e-12;
  r.pass = std::abs(r.lhs - r.analytic) <= 4.0 * r.lhs_se + tol &&
           std::abs(r.rhs - r.analytic) <= 4.0 * r.rhs_se + tol &&
           std::abs(r.unweighted) <= 4.0 * r.unweighted_se + tol;
  return r;
}

void export_paths_csv(const PathBatch& paths, const TimeGrid& grid, const std::string& file) {
  if (paths.X.empty()) throw std::invalid_argument("export_paths_csv: batch has no stored paths");
  std::ofstream out(file);
  if (!out) throw std::runtime_error("export_paths_csv: cannot open " + file);
  const std::int64_t m = paths.X[0].cols;
  const std::int64_t d = paths.Z.empty() ? 0 : paths.Z[0].cols;
  out << "path,i,t";
  for (std::int64_t j = 0; j < m; ++j) out << ",x" << j;
  out << ",y";
  for (std::int64_t j = 0; j < d; ++j) out << ",z" << j;
  out << "\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.17g", v);
    out << buf;
  };
  for (std::int64_t p = 0; p < paths.batch; ++p) {
    for (std::size_t i = 0; i < paths.X.size(); ++i) {
      out << p << ',' << i;
      put(grid.knot(static_cast<std::int64_t>(i)));
      for (std::int64_t j = 0; j < m; ++j) put(paths.X[i].at(p, j));
      put(paths.Y[i].at(p, 0));
      if (i < paths.Z.size())
        for (std::int64_t j = 0; j < d; ++j) put(paths.Z[i].at(p, j));
      out << "\n";
    }
  }
}

}  // namespace bsde
