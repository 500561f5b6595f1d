#include "bsde/optimizer.hpp"

#include <cmath>
#include <stdexcept>

#include "bsde/kernels.hpp"

namespace bsde {

void AdamState::init(const std::vector<ParamRef>& params, AdamConfig c) {
  cfg = c;
  step = 0;
  m.clear();
  v.clear();
  for (const auto& p : params) {
    m.push_back(Tensor::zeros(p.tensor->rows, p.tensor->cols));
    v.push_back(Tensor::zeros(p.tensor->rows, p.tensor->cols));
  }
}

void adam_step(AdamState& state, const std::vector<ParamRef>& params, const GradientMap& grads,
               double lr) {
  if (lr <= 0.0) throw std::invalid_argument("adam_step: lr must be positive");
  if (params.size() != grads.by_leaf.size())
    throw std::invalid_argument("adam_step: gradient map does not match parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!grads.by_leaf[i].all_finite())
      throw std::runtime_error("adam_step: non-finite gradient for parameter " + params[i].name);
    if (!params[i].tensor->same_shape(grads.by_leaf[i]))
      throw std::invalid_argument("adam_step: gradient shape mismatch for " + params[i].name);
  }
  state.step += 1;
  const double bias1 = 1.0 - std::pow(state.cfg.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(state.cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    kernels::adam_update(*params[i].tensor, grads.by_leaf[i], state.m[i], state.v[i], lr,
                         state.cfg.beta1, state.cfg.beta2, state.cfg.eps, bias1, bias2);
  }
}

double lr_at(const LrSchedule& s, std::int64_t step) {
  if (step < 0 || step > s.total_steps) throw std::invalid_argument("lr_at: step out of range");
  if (s.start_rate < s.end_rate || s.end_rate <= 0.0)
    throw std::invalid_argument("lr_at: need start_rate >= end_rate > 0");
  const std::int64_t decays = std::max<std::int64_t>(1, s.total_steps / s.decay_interval);
  const double factor = std::pow(s.end_rate / s.start_rate, 1.0 / static_cast<double>(decays));
  return s.start_rate * std::pow(factor, static_cast<double>(step / s.decay_interval));
}

}  // namespace bsde
