#include "sarfuse/nn/lstm.hpp"

#include <cmath>

#include "sarfuse/error.hpp"

namespace sarfuse::nn {

namespace {

Eigen::ArrayXXd sigmoid_array(const Eigen::ArrayXXd& z) {
  return z.unaryExpr([](double v) { return sigmoid(v); });
}

// Applies the gate nonlinearities in place on a batch x 4H pre-activation block.
template <class Block>
void activate_gates(Block&& z, int hidden) {
  z.leftCols(2 * hidden) = sigmoid_array(z.leftCols(2 * hidden).array()).matrix();
  z.middleCols(2 * hidden, hidden) = z.middleCols(2 * hidden, hidden).array().tanh().matrix();
  z.rightCols(hidden) = sigmoid_array(z.rightCols(hidden).array()).matrix();
}

}  // namespace

LstmCell LstmCell::create(ParamStore& store, const std::string& prefix, int input, int hidden) {
  LstmCell cell;
  cell.input = input;
  cell.hidden = hidden;
  cell.weight = store.add(prefix + ".weight", {hidden + input, 4 * hidden});
  cell.bias = store.add(prefix + ".bias", {4 * hidden});
  return cell;
}

void LstmCell::init(ParamStore& store, Rng& rng) const {
  const double limit = 1.0 / std::sqrt(static_cast<double>(hidden));
  std::uniform_real_distribution<double> dist(-limit, limit);
  auto w = store.matrix(weight);
  for (Eigen::Index c = 0; c < w.cols(); ++c) {
    for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = dist(rng);
  }
  auto b = store.matrix(bias);
  b.setZero();
  b.topRows(hidden).setOnes();
}

StepState lstm_step(const ParamStore& store, const LstmCell& cell, const Matrix& x, const Matrix& h_prev,
                    const Matrix& c_prev, Matrix* gates) {
  if (x.cols() != cell.input || h_prev.cols() != cell.hidden || c_prev.cols() != cell.hidden ||
      h_prev.rows() != x.rows() || c_prev.rows() != x.rows()) {
    throw ValidationError("lstm_step: dimension mismatch");
  }
  const int H = cell.hidden;
  const auto w = store.matrix(cell.weight);
  const auto b = store.matrix(cell.bias);
  Matrix z = h_prev * w.topRows(H);
  z.noalias() += x * w.bottomRows(cell.input);
  z.rowwise() += b.col(0).transpose();
  activate_gates(z, H);
  StepState s;
  s.c = z.leftCols(H).cwiseProduct(c_prev) + z.middleCols(H, H).cwiseProduct(z.middleCols(2 * H, H));
  s.h = z.rightCols(H).cwiseProduct(s.c.array().tanh().matrix());
  if (gates != nullptr) *gates = std::move(z);
  return s;
}

void lstm_forward(const ParamStore& store, const LstmCell& cell, const Matrix& x, int steps, int batch, bool reverse,
                  LstmCache& cache) {
  if (x.cols() != cell.input) throw ValidationError("lstm: input width mismatch");
  const int H = cell.hidden;
  const auto w = store.matrix(cell.weight);
  const auto b = store.matrix(cell.bias);
  cache.gates.noalias() = x * w.bottomRows(cell.input);
  cache.gates.rowwise() += b.col(0).transpose();
  cache.cells.resize(x.rows(), H);
  cache.hidden.resize(x.rows(), H);
  Matrix h_prev = Matrix::Zero(batch, H);
  Matrix c_prev = Matrix::Zero(batch, H);
  for (int s = 0; s < steps; ++s) {
    const int t = reverse ? steps - 1 - s : s;
    auto z = step_rows(cache.gates, t, batch);
    if (s > 0) z.noalias() += h_prev * w.topRows(H);
    activate_gates(z, H);
    auto c = step_rows(cache.cells, t, batch);
    c = z.leftCols(H).cwiseProduct(c_prev) + z.middleCols(H, H).cwiseProduct(z.middleCols(2 * H, H));
    auto h = step_rows(cache.hidden, t, batch);
    h = z.rightCols(H).cwiseProduct(c.array().tanh().matrix());
    h_prev = h;
    c_prev = c;
  }
}

void lstm_backward(const ParamStore& store, const LstmCell& cell, const Matrix& x, int steps, int batch, bool reverse,
                   const LstmCache& cache, const Matrix& d_hidden, Matrix* dx, std::span<double> grad) {
  const int H = cell.hidden;
  const auto w = store.matrix(cell.weight);
  auto gw = grad_matrix(grad, store.info(cell.weight));
  auto gb = grad_matrix(grad, store.info(cell.bias));
  Matrix dz_all(x.rows(), 4 * H);
  Matrix dh_next = Matrix::Zero(batch, H);
  Matrix dc_next = Matrix::Zero(batch, H);
  Eigen::ArrayXXd dz(batch, 4 * H);
  for (int s = steps - 1; s >= 0; --s) {
    const int t = reverse ? steps - 1 - s : s;
    const int t_prev = reverse ? t + 1 : t - 1;
    const auto g = step_rows(cache.gates, t, batch).array();
    const auto f = g.leftCols(H);
    const auto i = g.middleCols(H, H);
    const auto cand = g.middleCols(2 * H, H);
    const auto o = g.rightCols(H);
    const Eigen::ArrayXXd tanh_c = step_rows(cache.cells, t, batch).array().tanh();
    const Eigen::ArrayXXd dh = step_rows(d_hidden, t, batch).array() + dh_next.array();
    const Eigen::ArrayXXd dc = dh * o * (1.0 - tanh_c.square()) + dc_next.array();
    if (s > 0) {
      const auto c_prev = step_rows(cache.cells, t_prev, batch).array();
      dz.leftCols(H) = dc * c_prev * f * (1.0 - f);
    } else {
      dz.leftCols(H).setZero();
    }
    dz.middleCols(H, H) = dc * cand * i * (1.0 - i);
    dz.middleCols(2 * H, H) = dc * i * (1.0 - cand.square());
    dz.rightCols(H) = dh * tanh_c * o * (1.0 - o);
    dc_next = (dc * f).matrix();
    step_rows(dz_all, t, batch) = dz.matrix();
    if (s > 0) {
      const auto h_prev = step_rows(cache.hidden, t_prev, batch);
      gw.topRows(H).noalias() += h_prev.transpose() * dz.matrix();
      dh_next.noalias() = dz.matrix() * w.topRows(H).transpose();
    }
  }
  gw.bottomRows(cell.input).noalias() += x.transpose() * dz_all;
  gb.col(0) += dz_all.colwise().sum().transpose();
  if (dx != nullptr) dx->noalias() = dz_all * w.bottomRows(cell.input).transpose();
}

BiLstm BiLstm::create(ParamStore& store, const std::string& prefix, int input, int hidden) {
  BiLstm layer;
  layer.forward_cell = LstmCell::create(store, prefix + ".fwd", input, hidden);
  layer.backward_cell = LstmCell::create(store, prefix + ".bwd", input, hidden);
  return layer;
}

void BiLstm::init(ParamStore& store, Rng& rng) const {
  forward_cell.init(store, rng);
  backward_cell.init(store, rng);
}

void bilstm_forward(const ParamStore& store, const BiLstm& layer, const Matrix& x, int steps, int batch,
                    BiLstmCache& cache) {
  lstm_forward(store, layer.forward_cell, x, steps, batch, false, cache.fwd);
  lstm_forward(store, layer.backward_cell, x, steps, batch, true, cache.bwd);
  const int H = layer.forward_cell.hidden;
  cache.output.resize(x.rows(), 2 * H);
  cache.output.leftCols(H) = cache.fwd.hidden;
  cache.output.rightCols(H) = cache.bwd.hidden;
}

void bilstm_backward(const ParamStore& store, const BiLstm& layer, const Matrix& x, int steps, int batch,
                     const BiLstmCache& cache, const Matrix& d_output, Matrix* dx, std::span<double> grad) {
  const int H = layer.forward_cell.hidden;
  const Matrix d_fwd = d_output.leftCols(H);
  const Matrix d_bwd = d_output.rightCols(H);
  if (dx == nullptr) {
    lstm_backward(store, layer.forward_cell, x, steps, batch, false, cache.fwd, d_fwd, nullptr, grad);
    lstm_backward(store, layer.backward_cell, x, steps, batch, true, cache.bwd, d_bwd, nullptr, grad);
    return;
  }
  Matrix dx_bwd;
  lstm_backward(store, layer.forward_cell, x, steps, batch, false, cache.fwd, d_fwd, dx, grad);
  lstm_backward(store, layer.backward_cell, x, steps, batch, true, cache.bwd, d_bwd, &dx_bwd, grad);
  *dx += dx_bwd;
}

}  // namespace sarfuse::nn
