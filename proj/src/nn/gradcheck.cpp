#include "sarfuse/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "sarfuse/error.hpp"

namespace sarfuse::nn {

std::uint64_t fingerprint_mix(std::uint64_t seed, std::uint64_t value) {
  seed ^= value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
  return seed * 0x100000001b3ULL;
}

GradCheckReport grad_check(const Objective& objective, std::span<const double> params,
                           std::span<const double> analytic, std::span<const std::size_t> coordinates, double step,
                           double floor) {
  if (params.size() != analytic.size()) throw ValidationError("grad_check: gradient size mismatch");
  GradCheckReport report;
  if (coordinates.empty()) {
    report.coordinates.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) report.coordinates[i] = i;
  } else {
    report.coordinates.assign(coordinates.begin(), coordinates.end());
  }
  std::vector<double> probe(params.begin(), params.end());
  report.relative_errors.reserve(report.coordinates.size());
  for (std::size_t idx : report.coordinates) {
    const double original = probe.at(idx);
    probe[idx] = original + step;
    const Probe plus = objective(probe);
    probe[idx] = original - step;
    const Probe minus = objective(probe);
    probe[idx] = original;
    if (plus.pattern != minus.pattern) {
      ++report.skipped_kinks;
      report.relative_errors.push_back(-1.0);
      continue;
    }
    const double numeric = (plus.loss - minus.loss) / (2.0 * step);
    const double a = analytic[idx];
    const double denom = std::max({std::abs(a), std::abs(numeric), floor});
    const double rel = std::abs(a - numeric) / denom;
    report.relative_errors.push_back(rel);
    ++report.checked;
    if (rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_coordinate = idx;
    }
  }
  return report;
}

}  // namespace sarfuse::nn
