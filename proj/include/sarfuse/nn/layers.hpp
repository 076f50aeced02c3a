#pragma once

#include <random>
#include <string>
#include <vector>

#include "sarfuse/nn/params.hpp"

namespace sarfuse::nn {

// Sequence batches are (steps * batch) x channels matrices; row t * batch + b holds
// sample b at time step t, so one time step is a contiguous row block.

inline auto step_rows(Matrix& m, int t, int batch) { return m.middleRows(t * batch, batch); }
inline auto step_rows(const Matrix& m, int t, int batch) { return m.middleRows(t * batch, batch); }

using Rng = std::mt19937_64;

/// Time-distributed fully connected layer, y = x W + b.
struct Dense {
  int in = 0;
  int out = 0;
  std::size_t weight = 0;  // in x out
  std::size_t bias = 0;    // out

  static Dense create(ParamStore& store, const std::string& prefix, int in, int out);
  /// Glorot-uniform weights, zero bias.
  void init(ParamStore& store, Rng& rng) const;
  void forward(const ParamStore& store, const Matrix& x, Matrix& y) const;
  /// Accumulates parameter gradients into `grad`; writes dx when non-null.
  void backward(const ParamStore& store, const Matrix& x, const Matrix& dy, Matrix* dx,
                std::span<double> grad) const;
};

/// 1-D cross-correlation along time with zero "same" padding (odd kernel).
struct Conv1d {
  int in = 0;
  int out = 0;
  int kernel = 0;
  std::size_t weight = 0;  // {kernel, in, out}
  std::size_t bias = 0;    // out

  static Conv1d create(ParamStore& store, const std::string& prefix, int in, int out, int kernel);
  void init(ParamStore& store, Rng& rng) const;
  void forward(const ParamStore& store, const Matrix& x, int steps, int batch, Matrix& y) const;
  void backward(const ParamStore& store, const Matrix& x, int steps, int batch, const Matrix& dy, Matrix* dx,
                std::span<double> grad) const;
};

/// Sliding-window maximum along time, stride 1, window centred on the step and
/// truncated at the sequence ends so the length is preserved.
/// `argmax` receives the source time step of every output element.
void maxpool1d_forward(const Matrix& x, int steps, int batch, int pool, Matrix& y, std::vector<int>& argmax);
void maxpool1d_backward(const Matrix& dy, int steps, int batch, const std::vector<int>& argmax, Matrix& dx);

void relu_forward(const Matrix& x, Matrix& y);
void relu_backward(const Matrix& x, const Matrix& dy, Matrix& dx);

double sigmoid(double z);

}  // namespace sarfuse::nn
