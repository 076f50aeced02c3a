#include "sarfuse/preprocess.hpp"

#include <algorithm>

#include "sarfuse/error.hpp"
#include "sarfuse/interp.hpp"

namespace sarfuse::preprocess {

void OutlierParams::validate() const {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw ValidationError("outlier alpha and beta must be > 0");
}

NdviSeries remove_outliers(const NdviSeries& ndvi, const TemporalGrid& grid, const OutlierParams& params) {
  params.validate();
  if (ndvi.size() != static_cast<std::size_t>(grid.length)) {
    throw ValidationError("series length does not match grid length");
  }
  std::vector<int> present;
  for (int t = 0; t < grid.length; ++t) {
    if (ndvi[t]) present.push_back(t);
  }
  NdviSeries out = ndvi;
  for (std::size_t k = 1; k + 1 < present.size(); ++k) {
    const int prev = present[k - 1];
    const int cur = present[k];
    const int next = present[k + 1];
    double drop = *ndvi[prev] - *ndvi[cur];
    double rise = *ndvi[next] - *ndvi[cur];
    if (params.per_day) {
      drop /= static_cast<double>(grid.doy(cur) - grid.doy(prev));
      rise /= static_cast<double>(grid.doy(next) - grid.doy(cur));
    }
    const double straddle = *ndvi[next] - *ndvi[prev];
    if (drop >= params.alpha && rise >= params.beta && straddle >= params.gamma) out[cur].reset();
  }
  return out;
}

double coverage(const NdviSeries& ndvi) {
  if (ndvi.empty()) return 0.0;
  const auto absent = std::count_if(ndvi.begin(), ndvi.end(), [](const auto& v) { return !v.has_value(); });
  return static_cast<double>(absent) / static_cast<double>(ndvi.size());
}

void DensityCriteria::validate() const {
  if (max_consecutive_summer < 0 || max_total_summer < 0 || max_consecutive_other < 0) {
    throw ValidationError("density bounds must be >= 0");
  }
  if (!(max_overall_coverage >= 0.0 && max_overall_coverage <= 1.0)) {
    throw ValidationError("max_overall_coverage must lie in [0, 1]");
  }
}

bool passes_density(const NdviSeries& ndvi, const TemporalGrid& grid, const DensityCriteria& c) {
  c.validate();
  if (ndvi.size() != static_cast<std::size_t>(grid.length)) {
    throw ValidationError("series length does not match grid length");
  }
  // Runs are counted separately inside and outside June/July; crossing the window
  // boundary starts a new run.
  int summer_total = 0;
  int run = 0;
  bool run_in_summer = false;
  for (int t = 0; t < grid.length; ++t) {
    const int d = grid.doy(t);
    const bool summer = d >= c.summer_first_doy && d <= c.summer_last_doy;
    if (ndvi[t]) {
      run = 0;
      continue;
    }
    if (run > 0 && summer != run_in_summer) run = 0;
    run_in_summer = summer;
    ++run;
    if (summer) {
      ++summer_total;
      if (run > c.max_consecutive_summer) return false;
    } else if (run > c.max_consecutive_other) {
      return false;
    }
  }
  if (summer_total > c.max_total_summer) return false;
  return coverage(ndvi) <= c.max_overall_coverage;
}

Target build_target(const NdviSeries& ndvi, const TemporalGrid& grid) {
  Target target;
  target.values = interp::fill_akima(ndvi, grid);
  target.observed.resize(ndvi.size());
  for (std::size_t t = 0; t < ndvi.size(); ++t) target.observed[t] = ndvi[t] ? 1 : 0;
  return target;
}

}  // namespace sarfuse::preprocess
