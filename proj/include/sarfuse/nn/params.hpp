#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sarfuse::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

/// Named parameter tensor inside a flat buffer. 2-D views are column-major
/// (rows = shape[0], cols = product of the remaining axes).
struct ParamInfo {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// All learnable values of a network in one contiguous buffer, so optimizers and
/// serializers see a flat vector while layers see typed matrix views.
class ParamStore {
 public:
  std::size_t add(std::string name, std::vector<int> shape);

  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  const std::vector<ParamInfo>& entries() const { return entries_; }
  const ParamInfo& info(std::size_t index) const { return entries_.at(index); }
  std::size_t find(std::string_view name) const;

  ConstMatrixMap matrix(std::size_t index) const;
  MatrixMap matrix(std::size_t index);
  /// Block `block` of a 3-D entry {blocks, rows, cols}.
  ConstMatrixMap slice(std::size_t index, int block) const;

  /// Rounds every value to the nearest 32-bit float, the storage precision.
  void round_to_float();

  bool operator==(const ParamStore& other) const;

 private:
  std::vector<ParamInfo> entries_;
  std::vector<double> values_;
};

/// Gradient views mirroring a ParamStore layout.
MatrixMap grad_matrix(std::span<double> grad, const ParamInfo& info);
MatrixMap grad_slice(std::span<double> grad, const ParamInfo& info, int block);

}  // namespace sarfuse::nn
