#include "adsbae/nn/adam.hpp"

#include <cmath>

#include "adsbae/error.hpp"

namespace adsbae::nn {

AdamState AdamState::zeros(const ParameterList& params) {
  AdamState s;
  for (const Parameter* p : params) {
    s.m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    s.v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
  return s;
}

void adam_update(const ParameterList& params, AdamState& state, const AdamConfig& config) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ContractError("adam_update: optimizer state does not match parameter list");
  }
  for (const Parameter* p : params) {
    if (!p->grad.allFinite()) throw NumericError("adam_update: non-finite gradient for " + p->name);
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    state.m[k] = config.beta1 * state.m[k] + (1.0 - config.beta1) * p.grad;
    state.v[k] = config.beta2 * state.v[k] + (1.0 - config.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= config.learning_rate * (state.m[k].array() / correction1) /
                       ((state.v[k].array() / correction2).sqrt() + config.epsilon);
  }
}

}  // namespace adsbae::nn
