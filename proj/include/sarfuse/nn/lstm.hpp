#pragma once

#include <string>

#include "sarfuse/nn/layers.hpp"

namespace sarfuse::nn {

/// LSTM cell with fused gate parameters.
///
///   z_t   = W [h_{t-1}, x_t] + b,   W is (hidden + input) x 4*hidden
///   f_t   = sigmoid(z_f)            forget gate
///   i_t   = sigmoid(z_i)            input gate
///   C~_t  = tanh(z_C)               candidate cell
///   C_t   = f_t * C_{t-1} + i_t * C~_t
///   o_t   = sigmoid(z_o)            output gate
///   h_t   = o_t * tanh(C_t)
///
/// Rows 0..hidden-1 of W multiply h_{t-1}, the remaining rows multiply x_t.
/// Gate column blocks are ordered f, i, C, o.
struct LstmCell {
  int input = 0;
  int hidden = 0;
  std::size_t weight = 0;
  std::size_t bias = 0;

  static LstmCell create(ParamStore& store, const std::string& prefix, int input, int hidden);
  /// Uniform +-1/sqrt(hidden) weights, zero bias except forget gate = 1.
  void init(ParamStore& store, Rng& rng) const;
};

struct StepState {
  Matrix h;  // batch x hidden
  Matrix c;
};

/// One cell update for a batch; also returns the activated gates (batch x 4H).
StepState lstm_step(const ParamStore& store, const LstmCell& cell, const Matrix& x, const Matrix& h_prev,
                    const Matrix& c_prev, Matrix* gates = nullptr);

/// Activations kept for back-propagation through time.
struct LstmCache {
  Matrix gates;   // (steps*batch) x 4H, post-activation
  Matrix cells;   // (steps*batch) x H
  Matrix hidden;  // (steps*batch) x H, output sequence
};

/// Runs the cell over a sequence. With `reverse` the sequence is consumed from the
/// last step to the first; outputs stay aligned with input time steps.
void lstm_forward(const ParamStore& store, const LstmCell& cell, const Matrix& x, int steps, int batch, bool reverse,
                  LstmCache& cache);
void lstm_backward(const ParamStore& store, const LstmCell& cell, const Matrix& x, int steps, int batch, bool reverse,
                   const LstmCache& cache, const Matrix& d_hidden, Matrix* dx, std::span<double> grad);

/// Forward and time-reversed cells; output is [h_forward, h_backward] per step.
struct BiLstm {
  LstmCell forward_cell;
  LstmCell backward_cell;

  static BiLstm create(ParamStore& store, const std::string& prefix, int input, int hidden);
  void init(ParamStore& store, Rng& rng) const;
  int output_size() const { return 2 * forward_cell.hidden; }
};

struct BiLstmCache {
  LstmCache fwd;
  LstmCache bwd;
  Matrix output;  // (steps*batch) x 2H
};

void bilstm_forward(const ParamStore& store, const BiLstm& layer, const Matrix& x, int steps, int batch,
                    BiLstmCache& cache);
void bilstm_backward(const ParamStore& store, const BiLstm& layer, const Matrix& x, int steps, int batch,
                     const BiLstmCache& cache, const Matrix& d_output, Matrix* dx, std::span<double> grad);

}  // namespace sarfuse::nn
