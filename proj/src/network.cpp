#include "bsde/network.hpp"

#include <cmath>

namespace bsde {

std::int64_t SubnetParams::trainable_count() const {
  std::int64_t n = 0;
  for (const auto& l : layers) {
    n += l.W.size() + l.b.size();
    if (spec.batchnorm) n += l.bn.gamma.size() + l.bn.beta.size();
  }
  return n;
}

SubnetParams init_subnet(const SubnetSpec& spec, GaussianStream& rng, InitScheme scheme) {
  if (spec.input_dim < 1 || spec.output_dim < 1)
    throw std::invalid_argument("init_subnet: invalid spec dimensions");
  SubnetParams p;
  p.spec = spec;
  std::vector<std::int64_t> widths;
  widths.push_back(spec.input_dim);
  for (auto h : spec.hidden) widths.push_back(h);
  widths.push_back(spec.output_dim);

  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::int64_t fan_in = widths[l], fan_out = widths[l + 1];
    DenseLayer layer;
    layer.W = Tensor(fan_in, fan_out);
    if (scheme == InitScheme::uniform) {
      const double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (auto& w : layer.W.data) w = rng.uniform(-r, r);
    } else {
      const double s = std::sqrt(2.0 / static_cast<double>(fan_in));
      for (auto& w : layer.W.data) w = rng.next() * s;
    }
    layer.b = Tensor(1, fan_out);
    // Damped scale and off-zero shift: unit gamma would start the nets at
    // unit-variance outputs, which makes the first rollouts wild enough to
    // poison the optimizer moments before any signal arrives.
    layer.bn.gamma = Tensor(1, fan_out);
    for (auto& g : layer.bn.gamma.data) g = rng.uniform(0.1, 0.5);
    layer.bn.beta = Tensor(1, fan_out);
    for (auto& b : layer.bn.beta.data) b = 0.1 * rng.next();
    layer.bn.running_mean = Tensor(1, fan_out);
    layer.bn.running_var = Tensor::full(1, fan_out, 1.0);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

namespace {

bool rows_all_identical(const Tensor& t) {
  for (std::int64_t i = 1; i < t.rows; ++i)
    for (std::int64_t j = 0; j < t.cols; ++j)
      if (t.at(i, j) != t.at(0, j)) return false;
  return true;
}

}  // namespace

Var batchnorm_apply(DenseLayer& layer, Var h, RunMode mode, bool update_running, Tape& tape,
                    Var gamma, Var beta) {
  if (mode == RunMode::train) {
    // A batch of identical rows (deterministic initial state, or Z still at
    // zero) has exactly zero variance, so the normalized activations are
    // identically zero and the output is beta no matter the inputs: uniform
    // shifts keep the batch constant. Record that structure directly. The
    // generic path would reach the same forward value through the eps floor
    // but its per-row Jacobian entries are O(1/sqrt(eps)) quantities whose
    // exact cancellation across rows turns into amplified roundoff once
    // several such layers stack.
    const bool degenerate = rows_all_identical(h.val());
    Var mu{}, var{}, xhat{};
    if (degenerate) {
      mu = colmean(h);
      var = tape.constant(Tensor::zeros(1, h.cols()));
      xhat = tape.constant(Tensor::zeros(h.rows(), h.cols()));
    } else {
      mu = colmean(h);
      Var centered = sub(h, mu);
      var = colmean(square(centered));
      xhat = div(centered, sqrt_v(affine(var, 1.0, kBatchNormEps)));
    }
    if (update_running) {
      auto& rm = layer.bn.running_mean;
      auto& rv = layer.bn.running_var;
      const Tensor& bm = mu.val();
      const Tensor& bv = var.val();
      for (std::size_t i = 0; i < rm.data.size(); ++i) {
        // A zero-variance batch pins the mean exactly (adopt it without lag)
        // and carries no variance information (leave the estimate alone;
        // letting it decay toward zero would make the eval normalization
        // explosive to any train/eval input mismatch).
        if (degenerate) {
          rm.data[i] = bm.data[i];
        } else {
          rm.data[i] = kBatchNormMomentum * rm.data[i] + (1.0 - kBatchNormMomentum) * bm.data[i];
          rv.data[i] = kBatchNormMomentum * rv.data[i] + (1.0 - kBatchNormMomentum) * bv.data[i];
        }
      }
    }
    return add(mul(xhat, gamma), beta);
  }
  // Eval: normalize with the stored running statistics, as constants.
  Tensor inv_std(1, layer.bn.running_var.cols);
  for (std::size_t i = 0; i < inv_std.data.size(); ++i)
    inv_std.data[i] = 1.0 / std::sqrt(layer.bn.running_var.data[i] + kBatchNormEps);
  Var xhat = mul(sub(h, tape.constant(layer.bn.running_mean)), tape.constant(inv_std));
  return add(mul(xhat, gamma), beta);
}

Var subnet_forward(SubnetParams& params, Var input, RunMode mode, bool update_running, Tape& tape,
                   const std::string& prefix) {
  if (input.cols() != params.spec.input_dim)
    throw std::invalid_argument("subnet_forward: input has " + std::to_string(input.cols()) +
                                " columns, spec expects " +
                                std::to_string(params.spec.input_dim));
  if (mode == RunMode::train && input.rows() < 2)
    throw std::invalid_argument("subnet_forward: train mode needs batch >= 2");

  Var h = input;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& layer = params.layers[l];
    const std::string lp = prefix + ".layer" + std::to_string(l);
    Var W = tape.leaf(layer.W, lp + ".W");
    Var b = tape.leaf(layer.b, lp + ".b");
    h = add(matmul(h, W), b);
    if (params.spec.batchnorm) {
      Var gamma = tape.leaf(layer.bn.gamma, lp + ".gamma");
      Var beta = tape.leaf(layer.bn.beta, lp + ".beta");
      h = batchnorm_apply(layer, h, mode, update_running, tape, gamma, beta);
    }
    const bool last = l + 1 == params.layers.size();
    if (!last) h = relu(h);
  }
  return h;
}

}  // namespace bsde
