#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "adsbae/error.hpp"
#include "adsbae/nn/adam.hpp"
#include "adsbae/nn/layers.hpp"
#include "adsbae/nn/tensor.hpp"
#include "support.hpp"

using namespace adsbae;
using namespace adsbae::nn;
using testsupport::check_gradients;
using testsupport::random_matrix;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Plain scalar loops, written independently of the Eigen implementation.
struct ScalarLstm {
  std::size_t d, h;
  std::vector<double> wx, wh, b;  // row-major, gate blocks i, f, g, o

  explicit ScalarLstm(const LstmParams& p)
      : d(static_cast<std::size_t>(p.input())), h(static_cast<std::size_t>(p.hidden())) {
    for (std::size_t r = 0; r < 4 * h; ++r) {
      for (std::size_t c = 0; c < d; ++c) wx.push_back(p.w_input.value(r, c));
      for (std::size_t c = 0; c < h; ++c) wh.push_back(p.w_hidden.value(r, c));
      b.push_back(p.bias.value(r, 0));
    }
  }

  void step(const std::vector<double>& x, std::vector<double>& hs, std::vector<double>& cs) const {
    std::vector<double> z(4 * h);
    for (std::size_t r = 0; r < 4 * h; ++r) {
      double acc = b[r];
      for (std::size_t c = 0; c < d; ++c) acc += wx[r * d + c] * x[c];
      for (std::size_t c = 0; c < h; ++c) acc += wh[r * h + c] * hs[c];
      z[r] = acc;
    }
    for (std::size_t j = 0; j < h; ++j) {
      const double i = sigmoid(z[j]);
      const double f = sigmoid(z[h + j]);
      const double g = std::tanh(z[2 * h + j]);
      const double o = sigmoid(z[3 * h + j]);
      cs[j] = f * cs[j] + i * g;
      hs[j] = o * std::tanh(cs[j]);
    }
  }
};

LstmParams random_lstm(Eigen::Index d, Eigen::Index h, std::uint64_t seed) {
  LstmParams p("lstm", d, h);
  Rng rng(seed);
  p.init(rng);
  p.bias.value += random_matrix(4 * h, 1, rng, 0.5);
  return p;
}

}  // namespace

TEST_CASE("lstm_step closed forms") {
  LstmParams p("z", 1, 1);
  Vector x = Vector::Zero(1);
  auto [h0, c0] = lstm_step(p, x, Vector::Zero(1), Vector::Zero(1));
  CHECK(h0(0) == 0.0);
  CHECK(c0(0) == 0.0);
  auto [h1, c1] = lstm_step(p, x, Vector::Zero(1), Vector::Ones(1));
  CHECK(c1(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(h1(0) == doctest::Approx(0.5 * std::tanh(0.5)).epsilon(1e-15));
}

TEST_CASE("lstm_step matches scalar oracle") {
  const auto p = random_lstm(2, 3, 11);
  ScalarLstm oracle(p);
  std::mt19937_64 rng(5);
  Vector x = random_matrix(2, 1, rng);
  Vector h = random_matrix(3, 1, rng, 0.9);
  Vector c = random_matrix(3, 1, rng);
  auto [hn, cn] = lstm_step(p, x, h, c);
  std::vector<double> hs(h.data(), h.data() + 3), cs(c.data(), c.data() + 3);
  oracle.step({x(0), x(1)}, hs, cs);
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(hn(j) - hs[static_cast<std::size_t>(j)]) < 1e-12);
    CHECK(std::abs(cn(j) - cs[static_cast<std::size_t>(j)]) < 1e-12);
  }
}

TEST_CASE("lstm_step rejects bad inputs") {
  LstmParams p("z", 2, 3);
  Vector x(2);
  x << 1.0, std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(lstm_step(p, x, Vector::Zero(3), Vector::Zero(3)), NumericError);
  CHECK_THROWS_AS(lstm_step(p, Vector::Zero(3), Vector::Zero(3), Vector::Zero(3)), ContractError);
}

TEST_CASE("lstm_forward matches scalar oracle over a batch") {
  const auto p = random_lstm(2, 3, 12);
  ScalarLstm oracle(p);
  std::mt19937_64 rng(6);
  const SequenceShape shape{5, 4};
  const Matrix x = random_matrix(2, shape.steps * shape.batch, rng, 2.0);
  const Matrix h = lstm_forward(p, x, shape);
  for (Eigen::Index b = 0; b < shape.batch; ++b) {
    std::vector<double> hs(3, 0.0), cs(3, 0.0);
    for (Eigen::Index t = 0; t < shape.steps; ++t) {
      oracle.step({x(0, t * shape.batch + b), x(1, t * shape.batch + b)}, hs, cs);
      for (int j = 0; j < 3; ++j) CHECK(std::abs(h(j, t * shape.batch + b) - hs[static_cast<std::size_t>(j)]) < 1e-12);
    }
  }
  CHECK(h.cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("length-1 sequence equals a single step") {
  const auto p = random_lstm(2, 3, 13);
  std::mt19937_64 rng(7);
  const Matrix x = random_matrix(2, 1, rng);
  const Matrix h = lstm_forward(p, x, {1, 1});
  auto [hs, cs] = lstm_step(p, x.col(0), Vector::Zero(3), Vector::Zero(3));
  CHECK((h.col(0) - hs).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("palindromic input with shared parameters gives time-reversed directions") {
  const auto p = random_lstm(2, 3, 14);
  std::mt19937_64 rng(8);
  const SequenceShape shape{5, 2};
  Matrix x = random_matrix(2, shape.steps * shape.batch, rng);
  x = 0.5 * (x + reverse_steps(x, shape));
  const Matrix out = bilstm_forward(p, p, x, shape);
  const Matrix fwd = out.topRows(3);
  const Matrix bwd = out.bottomRows(3);
  CHECK((fwd - reverse_steps(bwd, shape)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("lstm_forward rejects empty sequences and backward requires a cache") {
  LstmParams p("z", 2, 3);
  CHECK_THROWS_AS(lstm_forward(p, Matrix(2, 0), {0, 1}), ContractError);
  LstmCache empty;
  CHECK_THROWS_AS(lstm_backward(p, empty, Matrix::Zero(3, 1)), ContractError);
}

TEST_CASE("mse loss and gradient") {
  const Tensor x({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK(mse_loss(x, x) == 0.0);
  Tensor shifted = x;
  for (auto& v : shifted.data) v += 0.5;
  CHECK(mse_loss(x, shifted) == doctest::Approx(0.25).epsilon(1e-15));
  const Tensor g = mse_gradient(x, shifted);
  for (double v : g.data) CHECK(v == doctest::Approx(2.0 * 0.5 / 6.0).epsilon(1e-15));

  std::mt19937_64 rng(9);
  std::normal_distribution<double> n;
  Tensor a({4, 5}), b({4, 5});
  double direct = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    a.data[i] = n(rng);
    b.data[i] = n(rng);
    direct += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
  }
  CHECK(mse_loss(a, b) == doctest::Approx(direct / 20.0).epsilon(1e-14));
  CHECK_THROWS_AS(mse_loss(a, Tensor({5, 4})), ContractError);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1.0}), ContractError);
}

TEST_CASE("dense gradients match finite differences") {
  Rng rng(21);
  Dense layer("dense", 3, 2);
  layer.init(rng);
  layer.bias.value = random_matrix(2, 1, rng);
  const Matrix x = random_matrix(3, 5, rng);
  const Matrix target = random_matrix(2, 5, rng);
  auto loss = [&] { return 0.5 * (layer.forward(x) - target).squaredNorm(); };
  ParameterList params;
  layer.collect(params);
  for (auto* p : params) p->zero_grad();
  const Matrix dx = layer.backward(x, layer.forward(x) - target);
  const auto r = check_gradients(params, loss);
  CHECK_MESSAGE(r.failures == 0, r.worst_name, " rel=", r.worst_relative);

  // input gradient
  Matrix xv = x;
  const double eps = 1e-5;
  for (Eigen::Index k = 0; k < xv.size(); ++k) {
    const double s = xv.data()[k];
    xv.data()[k] = s + eps;
    const double up = 0.5 * (layer.forward(xv) - target).squaredNorm();
    xv.data()[k] = s - eps;
    const double down = 0.5 * (layer.forward(xv) - target).squaredNorm();
    xv.data()[k] = s;
    CHECK(std::abs((up - down) / (2 * eps) - dx.data()[k]) <= 1e-4 * std::max(1e-4, std::abs(dx.data()[k])));
  }
}

TEST_CASE("lstm gradients match finite differences (H=4, T=6, d=2)") {
  auto p = random_lstm(2, 4, 22);
  std::mt19937_64 rng(23);
  const SequenceShape shape{6, 3};
  Matrix x = random_matrix(2, 18, rng);
  const Matrix target = random_matrix(4, 18, rng, 0.5);
  auto loss = [&] { return 0.5 * (lstm_forward(p, x, shape) - target).squaredNorm(); };
  ParameterList params;
  p.collect(params);
  for (auto* q : params) q->zero_grad();
  LstmCache cache;
  const Matrix h = lstm_forward(p, x, shape, &cache);
  const Matrix dx = lstm_backward(p, cache, h - target);
  const auto r = check_gradients(params, loss);
  CHECK(r.checked == 4 * 4 * 2 + 4 * 4 * 4 + 4 * 4);
  CHECK_MESSAGE(r.failures == 0, r.worst_name, " rel=", r.worst_relative);

  Parameter xp("x", 2, 18);
  xp.value = x;
  xp.grad = dx;
  auto loss_x = [&] { return 0.5 * (lstm_forward(p, xp.value, shape) - target).squaredNorm(); };
  const auto rx = check_gradients({&xp}, loss_x);
  CHECK_MESSAGE(rx.failures == 0, rx.worst_name, " rel=", rx.worst_relative);
}

TEST_CASE("bilstm gradients match finite differences (H=4, T=6, d=2)") {
  Rng rng(24);
  BiLstm layer("bi", 2, 4);
  layer.init(rng);
  const SequenceShape shape{6, 2};
  const Matrix x = random_matrix(2, 12, rng);
  const Matrix target = random_matrix(8, 12, rng, 0.5);
  auto loss = [&] { return 0.5 * (layer.forward(x, shape) - target).squaredNorm(); };
  ParameterList params;
  layer.collect(params);
  for (auto* q : params) q->zero_grad();
  BiLstmCache cache;
  const Matrix out = layer.forward(x, shape, &cache);
  const Matrix dx = layer.backward(cache, out - target);
  const auto r = check_gradients(params, loss);
  CHECK_MESSAGE(r.failures == 0, r.worst_name, " rel=", r.worst_relative);

  Parameter xp("x", 2, 12);
  xp.value = x;
  xp.grad = dx;
  auto loss_x = [&] { return 0.5 * (layer.forward(xp.value, shape) - target).squaredNorm(); };
  const auto rx = check_gradients({&xp}, loss_x);
  CHECK_MESSAGE(rx.failures == 0, rx.worst_name, " rel=", rx.worst_relative);
}

TEST_CASE("gradients scale linearly with the loss") {
  auto p = random_lstm(2, 3, 25);
  std::mt19937_64 rng(26);
  const SequenceShape shape{4, 2};
  const Matrix x = random_matrix(2, 8, rng);
  LstmCache cache;
  const Matrix h = lstm_forward(p, x, shape, &cache);
  ParameterList params;
  p.collect(params);
  for (auto* q : params) q->zero_grad();
  lstm_backward(p, cache, h);
  std::vector<Matrix> once;
  for (auto* q : params) once.push_back(q->grad);
  for (auto* q : params) q->zero_grad();
  lstm_backward(p, cache, 2.0 * h);
  for (std::size_t k = 0; k < params.size(); ++k) CHECK((params[k]->grad - 2.0 * once[k]).cwiseAbs().maxCoeff() < 1e-14);
  for (auto* q : params) q->zero_grad();
  lstm_backward(p, cache, Matrix::Zero(3, 8));
  for (auto* q : params) CHECK(q->grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adam first step and zero gradient") {
  Parameter w("w", 3, 1);
  w.value << 1.0, -2.0, 0.5;
  w.grad << 0.3, -40.0, 0.0;
  ParameterList params{&w};
  auto state = AdamState::zeros(params);
  AdamConfig cfg;
  const Matrix before = w.value;
  adam_update(params, state, cfg);
  CHECK(w.value(0) - before(0) == doctest::Approx(-cfg.learning_rate).epsilon(1e-6));
  CHECK(w.value(1) - before(1) == doctest::Approx(cfg.learning_rate).epsilon(1e-6));
  CHECK(w.value(2) == before(2));
  CHECK(state.step == 1);

  Parameter z("z", 2, 2);
  z.value.setConstant(3.0);
  ParameterList zp{&z};
  auto zs = AdamState::zeros(zp);
  for (int i = 0; i < 5; ++i) adam_update(zp, zs, cfg);
  CHECK(z.value.isApproxToConstant(3.0, 0.0));
}

TEST_CASE("adam rejects non-finite gradients before updating") {
  Parameter a("a", 1, 1), b("b", 1, 1);
  a.value(0) = 1.0;
  a.grad(0) = 1.0;
  b.grad(0) = std::numeric_limits<double>::infinity();
  ParameterList params{&a, &b};
  auto state = AdamState::zeros(params);
  CHECK_THROWS_AS(adam_update(params, state, {}), NumericError);
  CHECK(a.value(0) == 1.0);
  CHECK(state.step == 0);
}

TEST_CASE("adam descends a one-dimensional quadratic") {
  Parameter w("w", 1, 1);
  w.value(0) = 2.0;
  ParameterList params{&w};
  auto state = AdamState::zeros(params);
  AdamConfig cfg;
  cfg.learning_rate = 0.01;
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 100; ++i) {
    const double loss = (w.value(0) - 0.5) * (w.value(0) - 0.5);
    if (i >= 5) CHECK(loss < prev);
    prev = loss;
    w.grad(0) = 2.0 * (w.value(0) - 0.5);
    adam_update(params, state, cfg);
  }
  CHECK(prev < 0.5);
}
