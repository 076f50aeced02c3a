#include "sarfuse/nn/params.hpp"

#include <functional>
#include <numeric>

#include "sarfuse/error.hpp"

namespace sarfuse::nn {

namespace {
std::size_t product(const std::vector<int>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
}

std::pair<int, int> matrix_dims(const ParamInfo& info) {
  const int rows = info.shape.empty() ? 1 : info.shape[0];
  return {rows, static_cast<int>(info.size / static_cast<std::size_t>(rows))};
}
}  // namespace

std::size_t ParamStore::add(std::string name, std::vector<int> shape) {
  for (int d : shape) {
    if (d <= 0) throw ValidationError("parameter " + name + " has a non-positive dimension");
  }
  if (find(name) != entries_.size()) throw ValidationError("duplicate parameter name " + name);
  ParamInfo info{std::move(name), std::move(shape), values_.size(), 0};
  info.size = product(info.shape);
  values_.resize(values_.size() + info.size, 0.0);
  entries_.push_back(std::move(info));
  return entries_.size() - 1;
}

std::size_t ParamStore::find(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  return entries_.size();
}

ConstMatrixMap ParamStore::matrix(std::size_t index) const {
  const auto& e = entries_.at(index);
  const auto [rows, cols] = matrix_dims(e);
  return ConstMatrixMap(values_.data() + e.offset, rows, cols);
}

MatrixMap ParamStore::matrix(std::size_t index) {
  const auto& e = entries_.at(index);
  const auto [rows, cols] = matrix_dims(e);
  return MatrixMap(values_.data() + e.offset, rows, cols);
}

ConstMatrixMap ParamStore::slice(std::size_t index, int block) const {
  const auto& e = entries_.at(index);
  const int rows = e.shape.at(1);
  const int cols = e.shape.at(2);
  return ConstMatrixMap(values_.data() + e.offset + static_cast<std::size_t>(block) * rows * cols, rows, cols);
}

void ParamStore::round_to_float() {
  for (double& v : values_) v = static_cast<double>(static_cast<float>(v));
}

bool ParamStore::operator==(const ParamStore& other) const {
  if (entries_.size() != other.entries_.size() || values_ != other.values_) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name != other.entries_[i].name || entries_[i].shape != other.entries_[i].shape) return false;
  }
  return true;
}

MatrixMap grad_matrix(std::span<double> grad, const ParamInfo& info) {
  const auto [rows, cols] = matrix_dims(info);
  return MatrixMap(grad.data() + info.offset, rows, cols);
}

MatrixMap grad_slice(std::span<double> grad, const ParamInfo& info, int block) {
  const int rows = info.shape.at(1);
  const int cols = info.shape.at(2);
  return MatrixMap(grad.data() + info.offset + static_cast<std::size_t>(block) * rows * cols, rows, cols);
}

}  // namespace sarfuse::nn
