#include "sarfuse/nn/layers.hpp"

#include <cmath>

#include "sarfuse/error.hpp"

namespace sarfuse::nn {

namespace {
void glorot_fill(std::span<double> values, int fan_in, int fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : values) v = dist(rng);
}

void check_cols(const Matrix& x, int expected, const char* layer) {
  if (x.cols() != expected) {
    throw ValidationError(std::string(layer) + ": expected " + std::to_string(expected) + " input channels, got " +
                          std::to_string(x.cols()));
  }
}
}  // namespace

Dense Dense::create(ParamStore& store, const std::string& prefix, int in, int out) {
  Dense d;
  d.in = in;
  d.out = out;
  d.weight = store.add(prefix + ".weight", {in, out});
  d.bias = store.add(prefix + ".bias", {out});
  return d;
}

void Dense::init(ParamStore& store, Rng& rng) const {
  const auto& w = store.info(weight);
  glorot_fill(store.values().subspan(w.offset, w.size), in, out, rng);
  store.matrix(bias).setZero();
}

void Dense::forward(const ParamStore& store, const Matrix& x, Matrix& y) const {
  check_cols(x, in, "dense");
  const auto w = store.matrix(weight);
  const auto b = store.matrix(bias);
  y.noalias() = x * w;
  y.rowwise() += b.col(0).transpose();
}

void Dense::backward(const ParamStore& store, const Matrix& x, const Matrix& dy, Matrix* dx,
                     std::span<double> grad) const {
  const auto w = store.matrix(weight);
  grad_matrix(grad, store.info(weight)).noalias() += x.transpose() * dy;
  grad_matrix(grad, store.info(bias)).col(0) += dy.colwise().sum().transpose();
  if (dx != nullptr) dx->noalias() = dy * w.transpose();
}

Conv1d Conv1d::create(ParamStore& store, const std::string& prefix, int in, int out, int kernel) {
  if (kernel % 2 == 0) throw ValidationError("conv1d kernel size must be odd");
  Conv1d c;
  c.in = in;
  c.out = out;
  c.kernel = kernel;
  c.weight = store.add(prefix + ".weight", {kernel, in, out});
  c.bias = store.add(prefix + ".bias", {out});
  return c;
}

void Conv1d::init(ParamStore& store, Rng& rng) const {
  const auto& w = store.info(weight);
  glorot_fill(store.values().subspan(w.offset, w.size), in * kernel, out * kernel, rng);
  store.matrix(bias).setZero();
}

void Conv1d::forward(const ParamStore& store, const Matrix& x, int steps, int batch, Matrix& y) const {
  check_cols(x, in, "conv1d");
  const auto b = store.matrix(bias);
  y.resize(static_cast<Eigen::Index>(steps) * batch, out);
  y.rowwise() = b.col(0).transpose();
  const int half = kernel / 2;
  for (int k = 0; k < kernel; ++k) {
    const int shift = k - half;
    const int t0 = std::max(0, -shift);
    const int t1 = std::min(steps, steps - shift);
    if (t1 <= t0) continue;
    const auto rows = static_cast<Eigen::Index>(t1 - t0) * batch;
    y.middleRows(static_cast<Eigen::Index>(t0) * batch, rows).noalias() +=
        x.middleRows(static_cast<Eigen::Index>(t0 + shift) * batch, rows) * store.slice(weight, k);
  }
}

void Conv1d::backward(const ParamStore& store, const Matrix& x, int steps, int batch, const Matrix& dy, Matrix* dx,
                      std::span<double> grad) const {
  const auto& winfo = store.info(weight);
  grad_matrix(grad, store.info(bias)).col(0) += dy.colwise().sum().transpose();
  if (dx != nullptr) dx->setZero(x.rows(), in);
  const int half = kernel / 2;
  for (int k = 0; k < kernel; ++k) {
    const int shift = k - half;
    const int t0 = std::max(0, -shift);
    const int t1 = std::min(steps, steps - shift);
    if (t1 <= t0) continue;
    const auto rows = static_cast<Eigen::Index>(t1 - t0) * batch;
    const auto out_block = dy.middleRows(static_cast<Eigen::Index>(t0) * batch, rows);
    const auto in_block = x.middleRows(static_cast<Eigen::Index>(t0 + shift) * batch, rows);
    grad_slice(grad, winfo, k).noalias() += in_block.transpose() * out_block;
    if (dx != nullptr) {
      dx->middleRows(static_cast<Eigen::Index>(t0 + shift) * batch, rows).noalias() +=
          out_block * store.slice(weight, k).transpose();
    }
  }
}

void maxpool1d_forward(const Matrix& x, int steps, int batch, int pool, Matrix& y, std::vector<int>& argmax) {
  if (pool < 1) throw ValidationError("pool size must be >= 1");
  const auto channels = x.cols();
  y.resize(x.rows(), channels);
  argmax.resize(static_cast<std::size_t>(x.size()));
  const int before = (pool - 1) / 2;
  const int after = pool / 2;
  for (Eigen::Index c = 0; c < channels; ++c) {
    for (int t = 0; t < steps; ++t) {
      const int lo = std::max(0, t - before);
      const int hi = std::min(steps - 1, t + after);
      for (int b = 0; b < batch; ++b) {
        int best = lo;
        double best_value = x(static_cast<Eigen::Index>(lo) * batch + b, c);
        for (int s = lo + 1; s <= hi; ++s) {
          const double v = x(static_cast<Eigen::Index>(s) * batch + b, c);
          if (v > best_value) {
            best_value = v;
            best = s;
          }
        }
        const Eigen::Index row = static_cast<Eigen::Index>(t) * batch + b;
        y(row, c) = best_value;
        argmax[static_cast<std::size_t>(c * x.rows() + row)] = best;
      }
    }
  }
}

void maxpool1d_backward(const Matrix& dy, int steps, int batch, const std::vector<int>& argmax, Matrix& dx) {
  dx.setZero(dy.rows(), dy.cols());
  for (Eigen::Index c = 0; c < dy.cols(); ++c) {
    for (int t = 0; t < steps; ++t) {
      for (int b = 0; b < batch; ++b) {
        const Eigen::Index row = static_cast<Eigen::Index>(t) * batch + b;
        const int src = argmax[static_cast<std::size_t>(c * dy.rows() + row)];
        dx(static_cast<Eigen::Index>(src) * batch + b, c) += dy(row, c);
      }
    }
  }
}

void relu_forward(const Matrix& x, Matrix& y) { y = x.cwiseMax(0.0); }

void relu_backward(const Matrix& x, const Matrix& dy, Matrix& dx) {
  dx = (x.array() > 0.0).select(dy, 0.0);
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace sarfuse::nn
