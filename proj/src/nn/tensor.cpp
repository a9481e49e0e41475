#include "adsbae/nn/tensor.hpp"

#include <functional>
#include <numeric>

#include "adsbae/error.hpp"

namespace adsbae::nn {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(std::vector<std::size_t> shape_, double fill)
    : shape(std::move(shape_)), data(element_count(shape), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
  if (data.size() != element_count(shape)) throw ContractError("tensor data length does not match its shape");
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape || a.data.size() != b.data.size()) throw ContractError("tensor shape mismatch");
  if (a.data.empty()) throw ContractError("empty tensor");
}

}  // namespace

double mse_loss(const Tensor& x, const Tensor& x_hat) {
  require_same_shape(x, x_hat);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double d = x_hat.data[i] - x.data[i];
    sum += d * d;
  }
  return sum / static_cast<double>(x.data.size());
}

Tensor mse_gradient(const Tensor& x, const Tensor& x_hat) {
  require_same_shape(x, x_hat);
  Tensor g(x.shape);
  const double scale = 2.0 / static_cast<double>(x.data.size());
  for (std::size_t i = 0; i < x.data.size(); ++i) g.data[i] = scale * (x_hat.data[i] - x.data[i]);
  return g;
}

}  // namespace adsbae::nn
