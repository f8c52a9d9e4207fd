#include "peris/lstm.hpp"

#include <cmath>

namespace peris {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

LstmParams LstmParams::zeros(std::size_t k) {
  const auto n = static_cast<Eigen::Index>(k);
  return {Matrix::Zero(4 * n, n), Matrix::Zero(4 * n, n), Vector::Zero(4 * n)};
}

LstmParams LstmParams::random(std::size_t k, Rng& rng) {
  LstmParams p = zeros(k);
  const double bound = 1.0 / std::sqrt(static_cast<double>(k));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < p.w_input.size(); ++i) p.w_input.data()[i] = dist(rng);
  for (Eigen::Index i = 0; i < p.w_hidden.size(); ++i) p.w_hidden.data()[i] = dist(rng);
  return p;
}

Vector lstm_forward(const LstmParams& params, const Eigen::MatrixXd& inputs, LstmTrace* trace) {
  const Eigen::Index k = params.w_input.cols();
  const Eigen::Index steps = inputs.cols();
  Vector h = Vector::Zero(k);
  Vector c = Vector::Zero(k);
  Vector z(4 * k);
  if (trace) {
    trace->inputs = inputs;
    trace->h_prev.resize(k, steps);
    trace->c_prev.resize(k, steps);
    trace->gates.resize(4 * k, steps);
    trace->tanh_c.resize(k, steps);
  }
  for (Eigen::Index n = 0; n < steps; ++n) {
    z.noalias() = params.w_input * inputs.col(n);
    z.noalias() += params.w_hidden * h;
    z += params.bias;
    for (Eigen::Index j = 0; j < k; ++j) {
      z[j] = sigmoid(z[j]);
      z[k + j] = sigmoid(z[k + j]);
      z[2 * k + j] = std::tanh(z[2 * k + j]);
      z[3 * k + j] = sigmoid(z[3 * k + j]);
    }
    if (trace) {
      trace->h_prev.col(n) = h;
      trace->c_prev.col(n) = c;
      trace->gates.col(n) = z;
    }
    for (Eigen::Index j = 0; j < k; ++j) {
      c[j] = z[k + j] * c[j] + z[j] * z[2 * k + j];
      const double tc = std::tanh(c[j]);
      h[j] = z[3 * k + j] * tc;
      if (trace) trace->tanh_c(j, n) = tc;
    }
  }
  return h;
}

Eigen::MatrixXd lstm_backward(const LstmParams& params, const LstmTrace& trace,
                              const Vector& d_last_hidden, LstmParams& grad) {
  const Eigen::Index k = params.w_input.cols();
  const Eigen::Index steps = trace.inputs.cols();
  Eigen::MatrixXd d_inputs(k, steps);
  Vector dh = d_last_hidden;
  Vector dc = Vector::Zero(k);
  Vector dz(4 * k);
  for (Eigen::Index n = steps - 1; n >= 0; --n) {
    const auto gates = trace.gates.col(n);
    for (Eigen::Index j = 0; j < k; ++j) {
      const double i = gates[j], f = gates[k + j], g = gates[2 * k + j], o = gates[3 * k + j];
      const double tc = trace.tanh_c(j, n);
      const double d_o = dh[j] * tc;
      dc[j] += dh[j] * o * (1.0 - tc * tc);
      dz[j] = dc[j] * g * i * (1.0 - i);
      dz[k + j] = dc[j] * trace.c_prev(j, n) * f * (1.0 - f);
      dz[2 * k + j] = dc[j] * i * (1.0 - g * g);
      dz[3 * k + j] = d_o * o * (1.0 - o);
      dc[j] *= f;
    }
    grad.w_input.noalias() += dz * trace.inputs.col(n).transpose();
    grad.w_hidden.noalias() += dz * trace.h_prev.col(n).transpose();
    grad.bias += dz;
    d_inputs.col(n).noalias() = params.w_input.transpose() * dz;
    dh.noalias() = params.w_hidden.transpose() * dz;
  }
  return d_inputs;
}

}  // namespace peris
