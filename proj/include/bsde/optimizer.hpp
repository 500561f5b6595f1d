#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bsde/tape.hpp"
#include "bsde/tensor.hpp"

namespace bsde {

/// Named reference to a trainable tensor owned elsewhere.
struct ParamRef {
  Tensor* tensor = nullptr;
  std::string name;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  std::int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  void init(const std::vector<ParamRef>& params, AdamConfig c = {});
};

/// Standard Adam update with bias correction. Gradients must be aligned with
/// the parameter list; a non-finite gradient aborts with the parameter name.
void adam_step(AdamState& state, const std::vector<ParamRef>& params, const GradientMap& grads,
               double lr);

/// Piecewise-constant geometric decay: the rate is multiplied by a fixed
/// factor every decay_interval steps, with the factor solved so the rate at
/// total_steps equals end_rate.
struct LrSchedule {
  double start_rate = 1e-2;
  double end_rate = 1e-3;
  std::int64_t decay_interval = 100;
  std::int64_t total_steps = 1;
};

double lr_at(const LrSchedule& schedule, std::int64_t step);

}  // namespace bsde
