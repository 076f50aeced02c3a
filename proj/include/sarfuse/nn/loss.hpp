#pragma once

#include <span>

namespace sarfuse::nn {

/// sum w (pred - target)^2 / sum w. Throws when all weights are zero.
double weighted_mse(std::span<const double> pred, std::span<const double> target, std::span<const double> weights);

/// Un-normalized sum w (pred - target)^2; writes d/dpred of (sum / normalizer)
/// into `grad` when it is non-empty. Used when a batch is split across workers
/// but normalized once by the whole-batch weight sum.
double weighted_squared_error(std::span<const double> pred, std::span<const double> target,
                              std::span<const double> weights, double normalizer, std::span<double> grad);

/// Weighted binary cross-entropy on logits, sum w * BCE(sigmoid(z), y). Writes
/// d/dz of (sum / normalizer) into `grad` when non-empty.
double weighted_bce_logits(std::span<const double> logits, std::span<const double> labels,
                           std::span<const double> weights, double normalizer, std::span<double> grad);

}  // namespace sarfuse::nn
