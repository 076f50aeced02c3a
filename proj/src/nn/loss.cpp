#include "sarfuse/nn/loss.hpp"

#include <cmath>

#include "sarfuse/error.hpp"
#include "sarfuse/nn/layers.hpp"

namespace sarfuse::nn {

namespace {
void check_sizes(std::size_t a, std::size_t b, std::size_t c) {
  if (a != b || a != c) throw ValidationError("loss: prediction, target and weight lengths differ");
}
}  // namespace

double weighted_mse(std::span<const double> pred, std::span<const double> target, std::span<const double> weights) {
  check_sizes(pred.size(), target.size(), weights.size());
  double wsum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw ValidationError("loss weights must be >= 0");
    wsum += w;
  }
  if (!(wsum > 0.0)) throw ValidationError("weighted_mse: all weights are zero");
  return weighted_squared_error(pred, target, weights, wsum, {}) / wsum;
}

double weighted_squared_error(std::span<const double> pred, std::span<const double> target,
                              std::span<const double> weights, double normalizer, std::span<double> grad) {
  check_sizes(pred.size(), target.size(), weights.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - target[i];
    sum += weights[i] * e * e;
    if (!grad.empty()) grad[i] = 2.0 * weights[i] * e / normalizer;
  }
  return sum;
}

double weighted_bce_logits(std::span<const double> logits, std::span<const double> labels,
                           std::span<const double> weights, double normalizer, std::span<double> grad) {
  check_sizes(logits.size(), labels.size(), weights.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    const double y = labels[i];
    // log(1 + exp(-|z|)) keeps both branches finite.
    const double softplus = std::log1p(std::exp(-std::abs(z)));
    const double loss = std::max(z, 0.0) - z * y + softplus;
    sum += weights[i] * loss;
    if (!grad.empty()) grad[i] = weights[i] * (sigmoid(z) - y) / normalizer;
  }
  return sum;
}

}  // namespace sarfuse::nn
