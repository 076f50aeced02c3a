#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sarfuse/core.hpp"
#include "sarfuse/features.hpp"

namespace testing {

inline constexpr double kGap = std::numeric_limits<double>::quiet_NaN();

inline sarfuse::NdviSeries series(const std::vector<double>& v) {
  sarfuse::NdviSeries s;
  for (double x : v) s.push_back(std::isnan(x) ? std::nullopt : std::optional<double>(x));
  return s;
}

// Pixel with flat SAR channels and the given NDVI.
inline sarfuse::PixelSeries pixel(const std::vector<double>& ndvi, std::string id = "px", std::string parcel = "p",
                                  std::string region = "R1") {
  sarfuse::PixelSeries p;
  p.pixel_id = std::move(id);
  p.parcel_id = std::move(parcel);
  p.region_id = std::move(region);
  p.ndvi = series(ndvi);
  const std::size_t n = ndvi.size();
  p.channel(sarfuse::Channel::Sigma0VvDb).assign(n, -12.0);
  p.channel(sarfuse::Channel::Sigma0VhDb).assign(n, -19.0);
  p.channel(sarfuse::Channel::CohVv).assign(n, 0.4);
  p.channel(sarfuse::Channel::CohVh).assign(n, 0.3);
  sarfuse::features::derive_in_place(p);
  return p;
}

}  // namespace testing
