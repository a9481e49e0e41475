#pragma once

#include <cstddef>
#include <vector>

namespace adsbae::nn {

// Dense row-major array with an explicit shape.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape_, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape_, std::vector<double> data_);

  std::size_t size() const noexcept { return data.size(); }
  bool operator==(const Tensor&) const = default;
};

std::size_t element_count(const std::vector<std::size_t>& shape);

/// Mean over all elements of (x_hat - x)^2. Throws ContractError on shape mismatch.
double mse_loss(const Tensor& x, const Tensor& x_hat);

/// d mse / d x_hat = 2 (x_hat - x) / n.
Tensor mse_gradient(const Tensor& x, const Tensor& x_hat);

}  // namespace adsbae::nn
