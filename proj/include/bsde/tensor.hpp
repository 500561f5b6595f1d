#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace bsde {

/// Dense row-major matrix of doubles. Everything in the solver is batched
/// 2-d data: sample batches are (batch, features), scalars are (1, 1).
struct Tensor {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::int64_t r, std::int64_t c) : rows(r), cols(c), data(static_cast<std::size_t>(r * c), 0.0) {
    if (r < 0 || c < 0) throw std::invalid_argument("Tensor: negative dimension");
  }
  Tensor(std::int64_t r, std::int64_t c, std::vector<double> d) : rows(r), cols(c), data(std::move(d)) {
    if (static_cast<std::size_t>(r * c) != data.size())
      throw std::invalid_argument("Tensor: shape/data size mismatch");
  }

  static Tensor zeros(std::int64_t r, std::int64_t c) { return Tensor(r, c); }
  static Tensor full(std::int64_t r, std::int64_t c, double v) {
    Tensor t(r, c);
    for (auto& x : t.data) x = v;
    return t;
  }
  static Tensor scalar(double v) { return full(1, 1, v); }
  static Tensor identity(std::int64_t n) {
    Tensor t(n, n);
    for (std::int64_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
  }

  std::int64_t size() const { return rows * cols; }
  std::vector<std::int64_t> shape() const { return {rows, cols}; }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  double& at(std::int64_t i, std::int64_t j) { return data[static_cast<std::size_t>(i * cols + j)]; }
  double at(std::int64_t i, std::int64_t j) const { return data[static_cast<std::size_t>(i * cols + j)]; }

  double value() const {
    if (rows != 1 || cols != 1) throw std::logic_error("Tensor::value: not a scalar");
    return data[0];
  }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline std::string shape_str(const Tensor& t) {
  return "(" + std::to_string(t.rows) + "," + std::to_string(t.cols) + ")";
}

/// Checked-mode guard: rejects NaN/Inf with a message naming the tensor.
inline void require_finite(const Tensor& t, const std::string& what) {
  if (!t.all_finite()) throw std::runtime_error("non-finite values in " + what);
}

}  // namespace bsde
