#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "bsde/tensor.hpp"

namespace bsde {

/// Standard-normal stream: mt19937_64 uniforms fed through the Box-Muller
/// transform. mt19937_64's output sequence is fixed by the standard, so a
/// seed reproduces the same draws across runs of the same build.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : gen_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0,1], u2 in [0,1)
    const double u1 = (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  Tensor sample(std::int64_t rows, std::int64_t cols) {
    Tensor t(rows, cols);
    for (auto& x : t.data) x = next();
    return t;
  }

  double uniform(double lo, double hi) {
    const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// i.i.d. standard-normal batch, reproducible for a given stream state.
inline Tensor gaussian_batch(GaussianStream& rng, std::int64_t rows, std::int64_t cols) {
  return rng.sample(rows, cols);
}

/// Decorrelated sub-seed for a named purpose (init/train/validation streams).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace bsde
