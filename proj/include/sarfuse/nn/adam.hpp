#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace sarfuse::nn {

struct AdamState {
  double learning_rate = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;

  explicit AdamState(std::size_t parameter_count = 0, double lr = 0.005)
      : learning_rate(lr), first_moment(parameter_count, 0.0), second_moment(parameter_count, 0.0) {}
};

/// Bias-corrected Adam update in place.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

}  // namespace sarfuse::nn
