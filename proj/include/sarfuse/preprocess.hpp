#pragma once

#include <vector>

#include "sarfuse/core.hpp"

namespace sarfuse::preprocess {

/// Thresholds of the residual-cloud outlier pass.
///  alpha: minimum NDVI drop into the step, S(prev) - S(t)
///  beta:  minimum NDVI rise out of the step, S(next) - S(t)
///  gamma: floor on S(next) - S(prev); guards gradual senescence
struct OutlierParams {
  double alpha = 0.15;
  double beta = 0.15;
  double gamma = -0.05;
  /// Divide drop and rise by the DoY distance to the neighbour (per-day rates).
  bool per_day = false;

  void validate() const;
};

/// Single left-to-right pass over the original values. Neighbours are the nearest
/// present steps on either side; steps meeting all three conditions become absent.
NdviSeries remove_outliers(const NdviSeries& ndvi, const TemporalGrid& grid, const OutlierParams& params = {});

/// Fraction of absent steps.
double coverage(const NdviSeries& ndvi);

struct DensityCriteria {
  int max_consecutive_summer = 1;
  int max_total_summer = 3;
  int max_consecutive_other = 2;
  double max_overall_coverage = 0.35;
  int summer_first_doy = 153;  // June 1st, 2020
  int summer_last_doy = 213;   // July 31st, 2020

  void validate() const;
};

bool passes_density(const NdviSeries& ndvi, const TemporalGrid& grid, const DensityCriteria& criteria = {});

/// Complete target series plus the steps carrying real observations.
struct Target {
  std::vector<double> values;
  std::vector<std::uint8_t> observed;  // 1 = measured, 0 = Akima-filled
};

/// Akima-fills the gaps. Needs at least five observations.
Target build_target(const NdviSeries& ndvi, const TemporalGrid& grid);

}  // namespace sarfuse::preprocess
