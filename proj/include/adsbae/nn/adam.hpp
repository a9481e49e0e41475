#pragma once

#include <cstdint>
#include <vector>

#include "adsbae/nn/layers.hpp"

namespace adsbae::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment estimates, one pair per parameter in list order.
struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::int64_t step = 0;

  static AdamState zeros(const ParameterList& params);
};

/// One bias-corrected Adam step using the gradients stored in `params`.
/// Throws NumericError (before touching anything) on a non-finite gradient.
void adam_update(const ParameterList& params, AdamState& state, const AdamConfig& config);

}  // namespace adsbae::nn
