#pragma once

#include <cstddef>

#include "peris/random.hpp"
#include "peris/types.hpp"

namespace peris {

// Single-layer forward LSTM whose input and hidden sizes are both `k`.
// Gate blocks are stacked as [input, forget, cell, output].
struct LstmParams {
  Matrix w_input;   // 4k x k
  Matrix w_hidden;  // 4k x k
  Vector bias;      // 4k

  std::size_t hidden() const { return static_cast<std::size_t>(w_input.cols()); }

  static LstmParams zeros(std::size_t k);
  // Weights uniform in [-1/sqrt(k), 1/sqrt(k)], zero biases.
  static LstmParams random(std::size_t k, Rng& rng);
};

// Per-step activations kept for backpropagation through time.
struct LstmTrace {
  Eigen::MatrixXd inputs;  // k x L
  Eigen::MatrixXd h_prev;  // k x L
  Eigen::MatrixXd c_prev;  // k x L
  Eigen::MatrixXd gates;   // 4k x L, post-activation
  Eigen::MatrixXd tanh_c;  // k x L
};

// Returns the last hidden state. `inputs` holds one column per time step.
Vector lstm_forward(const LstmParams& params, const Eigen::MatrixXd& inputs,
                    LstmTrace* trace = nullptr);

// Adds parameter gradients into `grad` and returns dLoss/dInputs (k x L).
Eigen::MatrixXd lstm_backward(const LstmParams& params, const LstmTrace& trace,
                              const Vector& d_last_hidden, LstmParams& grad);

}  // namespace peris
