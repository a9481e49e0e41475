#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace adsbae::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

// A trainable array and its accumulated gradient (vectors are n x 1).
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string name_, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(name_)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}
  void zero_grad() { grad.setZero(); }
};

using ParameterList = std::vector<Parameter*>;

// Sequences of batched column vectors are stored time-major in one matrix:
// columns [t * batch, (t + 1) * batch) hold step t.
struct SequenceShape {
  Eigen::Index steps = 0;
  Eigen::Index batch = 0;
};

inline auto step_block(Matrix& m, SequenceShape s, Eigen::Index t) {
  return m.middleCols(t * s.batch, s.batch);
}
inline auto step_block(const Matrix& m, SequenceShape s, Eigen::Index t) {
  return m.middleCols(t * s.batch, s.batch);
}

/// Reverses the order of the time steps.
Matrix reverse_steps(const Matrix& m, SequenceShape s);

void uniform_init(Matrix& m, double limit, Rng& rng);
/// Glorot/Xavier uniform limit sqrt(6 / (fan_in + fan_out)).
void glorot_init(Matrix& m, Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng);

/// Throws NumericError naming `what` when m holds NaN or Inf.
void require_finite(const Matrix& m, const std::string& what);

// y = W x + b, applied column-wise.
class Dense {
 public:
  Dense() = default;
  Dense(std::string name, Eigen::Index in, Eigen::Index out);

  void init(Rng& rng);
  Matrix forward(const Matrix& x) const;
  /// Accumulates parameter gradients and returns dL/dx.
  Matrix backward(const Matrix& x, const Matrix& dy);

  Eigen::Index in() const { return weight.value.cols(); }
  Eigen::Index out() const { return weight.value.rows(); }
  void collect(ParameterList& out);

  Parameter weight;
  Parameter bias;
};

// Gate rows are stacked [input; forget; candidate; output], each `hidden` tall.
struct LstmParams {
  Parameter w_input;   // 4H x d
  Parameter w_hidden;  // 4H x H
  Parameter bias;      // 4H x 1

  LstmParams() = default;
  LstmParams(const std::string& name, Eigen::Index input, Eigen::Index hidden);

  Eigen::Index hidden() const { return w_hidden.value.cols(); }
  Eigen::Index input() const { return w_input.value.cols(); }
  /// Glorot input weights, uniform +-1/sqrt(H) recurrent weights, forget bias 1.
  void init(Rng& rng);
  void collect(ParameterList& out);
};

/// One LSTM step for a single sample:
///   i,f,o = sigmoid(.), g = tanh(.), c = f*c_prev + i*g, h = o*tanh(c).
/// Throws NumericError on non-finite inputs or outputs.
std::pair<Vector, Vector> lstm_step(const LstmParams& params, const Vector& x, const Vector& h_prev,
                                    const Vector& c_prev);

// Activations retained by a forward pass for backpropagation through time.
struct LstmCache {
  SequenceShape shape;
  Matrix inputs;  // d x (T*B)
  Matrix gates;   // 4H x (T*B), post-activation
  Matrix cells;   // H x ((T+1)*B), step 0 is the zero initial state
  Matrix hidden;  // H x ((T+1)*B)
  bool valid = false;
};

/// Runs the LSTM from zero state; returns H x (T*B) hidden states.
Matrix lstm_forward(const LstmParams& params, const Matrix& inputs, SequenceShape shape,
                    LstmCache* cache = nullptr);

/// Full (untruncated) BPTT. `d_hidden` is dL/dh_t for every step. Accumulates
/// parameter gradients and returns dL/dx. Throws ContractError without a cache.
Matrix lstm_backward(LstmParams& params, const LstmCache& cache, const Matrix& d_hidden);

struct BiLstmCache {
  LstmCache forward;
  LstmCache backward;
};

// Forward-in-time and backward-in-time LSTMs; outputs stacked [h_fwd; h_bwd].
class BiLstm {
 public:
  BiLstm() = default;
  BiLstm(const std::string& name, Eigen::Index input, Eigen::Index hidden);

  void init(Rng& rng);
  /// Returns 2H x (T*B).
  Matrix forward(const Matrix& inputs, SequenceShape shape, BiLstmCache* cache = nullptr) const;
  Matrix backward(const BiLstmCache& cache, const Matrix& d_out);
  void collect(ParameterList& out);
  Eigen::Index hidden() const { return fwd.hidden(); }

  LstmParams fwd;
  LstmParams bwd;
};

/// Two-direction forward over shared or distinct parameters.
Matrix bilstm_forward(const LstmParams& fwd, const LstmParams& bwd, const Matrix& inputs, SequenceShape shape,
                      BiLstmCache* cache = nullptr);
Matrix bilstm_backward(LstmParams& fwd, LstmParams& bwd, const BiLstmCache& cache, const Matrix& d_out);

}  // namespace adsbae::nn
