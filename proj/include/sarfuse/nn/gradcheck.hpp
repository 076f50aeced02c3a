#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace sarfuse::nn {

/// Loss of a model fragment at a parameter vector. `pattern` fingerprints the
/// piecewise-linear regime (ReLU signs, pooling winners); when it differs between
/// the +h and -h probes the difference quotient straddles a kink and that
/// coordinate is skipped rather than compared.
struct Probe {
  double loss = 0.0;
  std::uint64_t pattern = 0;
};

using Objective = std::function<Probe(std::span<const double> params)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_coordinate = 0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  std::vector<std::size_t> coordinates;
  std::vector<double> relative_errors;  // parallel to `coordinates`; -1 for skipped
};

/// Central differences, |analytic - numeric| / max(|analytic|, |numeric|, floor).
/// Checks `coordinates`, or every coordinate when that list is empty.
GradCheckReport grad_check(const Objective& objective, std::span<const double> params,
                           std::span<const double> analytic, std::span<const std::size_t> coordinates = {},
                           double step = 1e-4, double floor = 1e-6);

/// Mixes a value into a running FNV-style fingerprint.
std::uint64_t fingerprint_mix(std::uint64_t seed, std::uint64_t value);

}  // namespace sarfuse::nn
