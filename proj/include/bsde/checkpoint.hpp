#pragma once

#include <cstdint>
#include <string>

#include "bsde/scheme.hpp"

namespace bsde {

/// Versioned binary dump of every policy tensor (weights, biases, batchnorm
/// state, mu0) plus the originating RNG seed. Round trips are bit-exact.
void save_policy(const std::string& file, const SolverPolicy& policy, std::uint64_t seed);
SolverPolicy load_policy(const std::string& file, std::uint64_t* seed_out = nullptr);

}  // namespace bsde
