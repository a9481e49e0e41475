#include "adsbae/nn/layers.hpp"

#include <cmath>

#include "adsbae/error.hpp"

namespace adsbae::nn {

namespace {

Eigen::ArrayXXd sigmoid(const Eigen::ArrayXXd& z) { return (1.0 + (-z).exp()).inverse(); }

// tanh through the vectorized exp; absolute error stays near machine epsilon.
Eigen::ArrayXXd fast_tanh(const Eigen::ArrayXXd& z) { return 2.0 * (1.0 + (-2.0 * z).exp()).inverse() - 1.0; }

}  // namespace

Matrix reverse_steps(const Matrix& m, SequenceShape s) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index t = 0; t < s.steps; ++t) {
    step_block(out, s, s.steps - 1 - t) = step_block(m, s, t);
  }
  return out;
}

void uniform_init(Matrix& m, double limit, Rng& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
  }
}

void glorot_init(Matrix& m, Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  uniform_init(m, std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)), rng);
}

void require_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) throw NumericError("non-finite values in " + what);
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(std::string name, Eigen::Index in, Eigen::Index out)
    : weight(name + ".weight", out, in), bias(name + ".bias", out, 1) {}

void Dense::init(Rng& rng) {
  glorot_init(weight.value, in(), out(), rng);
  bias.value.setZero();
}

Matrix Dense::forward(const Matrix& x) const {
  Matrix y = weight.value * x;
  y.colwise() += bias.value.col(0);
  return y;
}

Matrix Dense::backward(const Matrix& x, const Matrix& dy) {
  weight.grad.noalias() += dy * x.transpose();
  bias.grad.col(0) += dy.rowwise().sum();
  return weight.value.transpose() * dy;
}

void Dense::collect(ParameterList& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

// ---------------------------------------------------------------------------
// LSTM

LstmParams::LstmParams(const std::string& name, Eigen::Index input, Eigen::Index hidden)
    : w_input(name + ".w_input", 4 * hidden, input),
      w_hidden(name + ".w_hidden", 4 * hidden, hidden),
      bias(name + ".bias", 4 * hidden, 1) {}

void LstmParams::init(Rng& rng) {
  const Eigen::Index h = hidden();
  glorot_init(w_input.value, input(), 4 * h, rng);
  uniform_init(w_hidden.value, 1.0 / std::sqrt(static_cast<double>(h)), rng);
  bias.value.setZero();
  bias.value.middleRows(h, h).setOnes();
}

void LstmParams::collect(ParameterList& out) {
  out.push_back(&w_input);
  out.push_back(&w_hidden);
  out.push_back(&bias);
}

std::pair<Vector, Vector> lstm_step(const LstmParams& params, const Vector& x, const Vector& h_prev,
                                    const Vector& c_prev) {
  const Eigen::Index h = params.hidden();
  if (x.size() != params.input() || h_prev.size() != h || c_prev.size() != h) {
    throw ContractError("lstm_step: dimension mismatch");
  }
  if (!x.allFinite() || !h_prev.allFinite() || !c_prev.allFinite()) {
    throw NumericError("lstm_step: non-finite input");
  }
  const Vector z = params.w_input.value * x + params.w_hidden.value * h_prev + params.bias.value.col(0);
  const Eigen::ArrayXd i = sigmoid(z.segment(0, h).array());
  const Eigen::ArrayXd f = sigmoid(z.segment(h, h).array());
  const Eigen::ArrayXd g = fast_tanh(z.segment(2 * h, h).array());
  const Eigen::ArrayXd o = sigmoid(z.segment(3 * h, h).array());
  Vector c = (f * c_prev.array() + i * g).matrix();
  Vector hn = (o * fast_tanh(c.array())).matrix();
  if (!c.allFinite() || !hn.allFinite()) throw NumericError("lstm_step: non-finite output");
  return {std::move(hn), std::move(c)};
}

Matrix lstm_forward(const LstmParams& params, const Matrix& inputs, SequenceShape shape, LstmCache* cache) {
  const Eigen::Index h = params.hidden();
  const Eigen::Index b = shape.batch;
  const Eigen::Index t_steps = shape.steps;
  if (inputs.rows() != params.input() || inputs.cols() != t_steps * b) {
    throw ContractError("lstm_forward: input shape mismatch");
  }
  if (t_steps == 0) throw ContractError("lstm_forward: empty sequence");

  Matrix gates = params.w_input.value * inputs;
  gates.colwise() += params.bias.value.col(0);
  Matrix cells = Matrix::Zero(h, (t_steps + 1) * b);
  Matrix hidden = Matrix::Zero(h, (t_steps + 1) * b);
  for (Eigen::Index t = 0; t < t_steps; ++t) {
    auto z = gates.middleCols(t * b, b);
    z.noalias() += params.w_hidden.value * hidden.middleCols(t * b, b);
    z.topRows(h) = sigmoid(z.topRows(h).array()).matrix();
    z.middleRows(h, h) = sigmoid(z.middleRows(h, h).array()).matrix();
    z.middleRows(2 * h, h) = fast_tanh(z.middleRows(2 * h, h).array()).matrix();
    z.bottomRows(h) = sigmoid(z.bottomRows(h).array()).matrix();
    cells.middleCols((t + 1) * b, b) =
        (z.middleRows(h, h).array() * cells.middleCols(t * b, b).array() +
         z.topRows(h).array() * z.middleRows(2 * h, h).array())
            .matrix();
    hidden.middleCols((t + 1) * b, b) =
        (z.bottomRows(h).array() * fast_tanh(cells.middleCols((t + 1) * b, b).array())).matrix();
  }
  Matrix out = hidden.rightCols(t_steps * b);
  require_finite(out, "lstm_forward output");
  if (cache) {
    cache->shape = shape;
    cache->inputs = inputs;
    cache->gates = std::move(gates);
    cache->cells = std::move(cells);
    cache->hidden = std::move(hidden);
    cache->valid = true;
  }
  return out;
}

Matrix lstm_backward(LstmParams& params, const LstmCache& cache, const Matrix& d_hidden) {
  if (!cache.valid) throw ContractError("lstm_backward: missing forward cache");
  const Eigen::Index h = params.hidden();
  const Eigen::Index b = cache.shape.batch;
  const Eigen::Index t_steps = cache.shape.steps;
  if (d_hidden.rows() != h || d_hidden.cols() != t_steps * b) {
    throw ContractError("lstm_backward: gradient shape mismatch");
  }
  Matrix dz(4 * h, t_steps * b);
  Matrix dh_next = Matrix::Zero(h, b);
  Eigen::ArrayXXd dc_next = Eigen::ArrayXXd::Zero(h, b);
  for (Eigen::Index t = t_steps - 1; t >= 0; --t) {
    const auto gate = cache.gates.middleCols(t * b, b);
    const Eigen::ArrayXXd i = gate.topRows(h).array();
    const Eigen::ArrayXXd f = gate.middleRows(h, h).array();
    const Eigen::ArrayXXd g = gate.middleRows(2 * h, h).array();
    const Eigen::ArrayXXd o = gate.bottomRows(h).array();
    const Eigen::ArrayXXd c_prev = cache.cells.middleCols(t * b, b).array();
    const Eigen::ArrayXXd tc = fast_tanh(cache.cells.middleCols((t + 1) * b, b).array());
    const Eigen::ArrayXXd dh = d_hidden.middleCols(t * b, b).array() + dh_next.array();
    const Eigen::ArrayXXd dc = dh * o * (1.0 - tc * tc) + dc_next;
    auto dzt = dz.middleCols(t * b, b);
    dzt.topRows(h) = (dc * g * i * (1.0 - i)).matrix();
    dzt.middleRows(h, h) = (dc * c_prev * f * (1.0 - f)).matrix();
    dzt.middleRows(2 * h, h) = (dc * i * (1.0 - g * g)).matrix();
    dzt.bottomRows(h) = (dh * tc * o * (1.0 - o)).matrix();
    dc_next = dc * f;
    dh_next.noalias() = params.w_hidden.value.transpose() * dzt;
  }
  params.w_input.grad.noalias() += dz * cache.inputs.transpose();
  params.w_hidden.grad.noalias() += dz * cache.hidden.leftCols(t_steps * b).transpose();
  params.bias.grad.col(0) += dz.rowwise().sum();
  return params.w_input.value.transpose() * dz;
}

// ---------------------------------------------------------------------------
// Bidirectional

Matrix bilstm_forward(const LstmParams& fwd, const LstmParams& bwd, const Matrix& inputs, SequenceShape shape,
                      BiLstmCache* cache) {
  const Eigen::Index h = fwd.hidden();
  if (bwd.hidden() != h) throw ContractError("bilstm_forward: direction hidden sizes differ");
  Matrix out(2 * h, inputs.cols());
  out.topRows(h) = lstm_forward(fwd, inputs, shape, cache ? &cache->forward : nullptr);
  const Matrix reversed = lstm_forward(bwd, reverse_steps(inputs, shape), shape, cache ? &cache->backward : nullptr);
  out.bottomRows(h) = reverse_steps(reversed, shape);
  return out;
}

Matrix bilstm_backward(LstmParams& fwd, LstmParams& bwd, const BiLstmCache& cache, const Matrix& d_out) {
  const Eigen::Index h = fwd.hidden();
  const SequenceShape shape = cache.forward.shape;
  Matrix dx = lstm_backward(fwd, cache.forward, d_out.topRows(h));
  const Matrix d_rev = lstm_backward(bwd, cache.backward, reverse_steps(d_out.bottomRows(h), shape));
  dx += reverse_steps(d_rev, shape);
  return dx;
}

BiLstm::BiLstm(const std::string& name, Eigen::Index input, Eigen::Index hidden)
    : fwd(name + ".fwd", input, hidden), bwd(name + ".bwd", input, hidden) {}

void BiLstm::init(Rng& rng) {
  fwd.init(rng);
  bwd.init(rng);
}

Matrix BiLstm::forward(const Matrix& inputs, SequenceShape shape, BiLstmCache* cache) const {
  return bilstm_forward(fwd, bwd, inputs, shape, cache);
}

Matrix BiLstm::backward(const BiLstmCache& cache, const Matrix& d_out) {
  return bilstm_backward(fwd, bwd, cache, d_out);
}

void BiLstm::collect(ParameterList& out) {
  fwd.collect(out);
  bwd.collect(out);
}

}  // namespace adsbae::nn
