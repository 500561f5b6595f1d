#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bsde/rng.hpp"
#include "bsde/tape.hpp"
#include "bsde/tensor.hpp"

namespace bsde {

enum class InitScheme { uniform, normal };
enum class RunMode { train, eval };

/// Feedforward subnet layout. Defaults follow the benchmark setup: two
/// hidden layers of width d+10, input d+1 (state and value) or d (state
/// only), output d, rectifier activation, batch normalization right after
/// each matrix multiplication and before activation.
struct SubnetSpec {
  std::int64_t input_dim = 1;
  std::vector<std::int64_t> hidden = {};
  std::int64_t output_dim = 1;
  bool batchnorm = true;

  static SubnetSpec paper_default(std::int64_t d, bool xy_input) {
    SubnetSpec s;
    s.input_dim = xy_input ? d + 1 : d;
    s.hidden = {d + 10, d + 10};
    s.output_dim = d;
    s.batchnorm = true;
    return s;
  }
};

struct BatchNormState {
  Tensor gamma, beta;              // trainable, (1, width)
  Tensor running_mean, running_var;  // inference statistics, (1, width)
};

struct DenseLayer {
  Tensor W;  // (in, out)
  Tensor b;  // (1, out)
  BatchNormState bn;
};

struct SubnetParams {
  SubnetSpec spec;
  std::vector<DenseLayer> layers;  // hidden layers then the output layer

  std::int64_t trainable_count() const;
};

inline constexpr double kBatchNormEps = 1e-6;
inline constexpr double kBatchNormMomentum = 0.99;

/// Weights drawn per scheme (uniform: Glorot range +-sqrt(6/(fan_in+fan_out));
/// normal: sigma = sqrt(2/fan_in)), biases zero, batchnorm gamma=1 beta=0,
/// running mean 0, running variance 1.
SubnetParams init_subnet(const SubnetSpec& spec, GaussianStream& rng, InitScheme scheme);

/// Forward pass recorded on the tape. Binds this subnet's trainable tensors
/// as leaves named "<prefix>.layerK.{W,b,gamma,beta}". Train mode normalizes
/// with batch statistics (batch >= 2 required) and, when update_running is
/// set, refreshes the running statistics; eval mode uses the stored running
/// statistics and is a pure function of (params, input).
Var subnet_forward(SubnetParams& params, Var input, RunMode mode, bool update_running, Tape& tape,
                   const std::string& prefix);

/// The normalization itself: train mode standardizes with batch statistics
/// (a batch of identical rows short-circuits to beta), eval mode with the
/// stored running statistics.
Var batchnorm_apply(DenseLayer& layer, Var h, RunMode mode, bool update_running, Tape& tape,
                    Var gamma, Var beta);

}  // namespace bsde
