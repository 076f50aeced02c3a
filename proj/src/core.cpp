#include "sarfuse/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <unordered_set>

#include "sarfuse/error.hpp"

namespace sarfuse {

void TemporalGrid::validate() const {
  if (step_days < 1) throw ValidationError("grid step_days must be >= 1");
  if (length < 2) throw ValidationError("grid length must be >= 2");
}

int TemporalGrid::doy(int index) const { return grid_doy(*this, index); }

int grid_doy(const TemporalGrid& grid, int index) {
  if (index < 0 || index >= grid.length) {
    throw ValidationError("grid index " + std::to_string(index) + " outside [0, " +
                          std::to_string(grid.length) + ")");
  }
  return grid.start_doy + index * grid.step_days;
}

std::optional<int> nearest_grid_index(const TemporalGrid& grid, int doy, int max_distance_days) {
  if (max_distance_days < 0) throw ValidationError("max_distance_days must be >= 0");
  // Floor division keeps the lower candidate on or before doy.
  const int offset = doy - grid.start_doy;
  int lower = offset >= 0 ? offset / grid.step_days : -((-offset + grid.step_days - 1) / grid.step_days);
  lower = std::clamp(lower, 0, grid.length - 1);
  int best = lower;
  int best_distance = std::abs(grid.doy(lower) - doy);
  if (lower + 1 < grid.length) {
    const int d = std::abs(grid.doy(lower + 1) - doy);
    if (d < best_distance) {
      best = lower + 1;
      best_distance = d;
    }
  }
  if (best_distance > max_distance_days) return std::nullopt;
  return best;
}

namespace {
constexpr std::array<std::string_view, kChannelCount> kChannelNames{
    "sigma0_vv_db", "sigma0_vh_db",          "coh_vv",          "coh_vh",
    "sigma0_ratio", "sigma0_cross_ratio_db", "mixed_coherence", "rvi"};
}

std::string_view channel_name(Channel c) { return kChannelNames[static_cast<int>(c)]; }

Channel channel_from_name(std::string_view name) {
  for (int i = 0; i < kChannelCount; ++i) {
    if (kChannelNames[i] == name) return static_cast<Channel>(i);
  }
  throw ValidationError("unknown channel '" + std::string(name) + "'");
}

std::size_t PixelSeries::present_count() const {
  return static_cast<std::size_t>(std::count_if(ndvi.begin(), ndvi.end(), [](const auto& v) { return v.has_value(); }));
}

void PixelSeries::validate(const TemporalGrid& grid) const {
  const auto n = static_cast<std::size_t>(grid.length);
  if (ndvi.size() != n) throw ValidationError("pixel " + pixel_id + ": NDVI length != grid length");
  for (std::size_t t = 0; t < n; ++t) {
    if (ndvi[t] && !(*ndvi[t] >= -1.0 && *ndvi[t] <= 1.0)) {
      throw ValidationError("pixel " + pixel_id + ": NDVI outside [-1, 1] at step " + std::to_string(t));
    }
  }
  for (Channel c : kAllChannels) {
    const auto& v = channel(c);
    if (v.size() != n) {
      throw ValidationError("pixel " + pixel_id + ": channel " + std::string(channel_name(c)) +
                            " length != grid length");
    }
    const bool coherence = c == Channel::CohVv || c == Channel::CohVh || c == Channel::MixedCoherence;
    for (std::size_t t = 0; t < n; ++t) {
      if (!std::isfinite(v[t]) || (coherence && (v[t] < 0.0 || v[t] > 1.0))) {
        throw ValidationError("pixel " + pixel_id + ": invalid " + std::string(channel_name(c)) +
                              " at step " + std::to_string(t));
      }
    }
  }
}

double CloudMask::coverage() const {
  if (bits.empty()) return 0.0;
  const auto cloudy = std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; });
  return static_cast<double>(cloudy) / static_cast<double>(bits.size());
}

void Dataset::validate() const {
  grid.validate();
  std::unordered_set<std::string> ids;
  std::unordered_set<std::string> parcels;
  for (const auto& px : pixels) {
    if (!ids.insert(px.pixel_id).second) throw ValidationError("duplicate pixel id " + px.pixel_id);
    parcels.insert(px.parcel_id);
    px.validate(grid);
  }
  for (const auto& label : labels) {
    if (!parcels.contains(label.parcel_id)) {
      throw ValidationError("label for unknown parcel " + label.parcel_id);
    }
    if (!std::is_sorted(label.event_doys.begin(), label.event_doys.end())) {
      throw ValidationError("label events not sorted for parcel " + label.parcel_id);
    }
    for (int d : label.event_doys) {
      if (d < grid.start_doy - grid.step_days || d > grid.last_doy() + grid.step_days) {
        throw ValidationError("label event DoY " + std::to_string(d) + " outside season for parcel " +
                              label.parcel_id);
      }
    }
  }
}

std::vector<std::string> Dataset::parcel_ids() const {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& px : pixels) {
    if (seen.insert(px.parcel_id).second) out.push_back(px.parcel_id);
  }
  return out;
}

std::unordered_map<std::string, std::vector<std::size_t>> Dataset::parcel_members() const {
  std::unordered_map<std::string, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < pixels.size(); ++i) out[pixels[i].parcel_id].push_back(i);
  return out;
}

const ParcelLabel* Dataset::find_label(std::string_view parcel_id) const {
  for (const auto& l : labels) {
    if (l.parcel_id == parcel_id) return &l;
  }
  return nullptr;
}

PixelSeries aggregate_pixels(std::span<const PixelSeries* const> members, std::string parcel_id) {
  if (members.empty()) throw ValidationError("cannot aggregate an empty parcel");
  const std::size_t n = members.front()->ndvi.size();
  PixelSeries out;
  out.pixel_id = parcel_id;
  out.parcel_id = std::move(parcel_id);
  out.region_id = members.front()->region_id;
  if (members.size() == 1) {
    out.ndvi = members.front()->ndvi;
    out.channels = members.front()->channels;
    return out;
  }
  out.ndvi.assign(n, std::nullopt);
  for (auto& ch : out.channels) ch.assign(n, 0.0);
  const double count = static_cast<double>(members.size());
  for (std::size_t t = 0; t < n; ++t) {
    double sum = 0.0;
    std::size_t present = 0;
    for (const PixelSeries* px : members) {
      if (px->ndvi.size() != n) throw ValidationError("parcel members disagree on series length");
      if (px->ndvi[t]) {
        sum += *px->ndvi[t];
        ++present;
      }
    }
    if (2 * present > members.size()) out.ndvi[t] = sum / static_cast<double>(present);
    for (int c = 0; c < kChannelCount; ++c) {
      double acc = 0.0;
      for (const PixelSeries* px : members) acc += px->channels[c][t];
      out.channels[c][t] = acc / count;
    }
  }
  return out;
}

PixelSeries parcel_series(const Dataset& dataset, std::string_view parcel_id) {
  std::vector<const PixelSeries*> members;
  for (const auto& px : dataset.pixels) {
    if (px.parcel_id == parcel_id) members.push_back(&px);
  }
  if (members.empty()) throw ValidationError("unknown parcel " + std::string(parcel_id));
  return aggregate_pixels(members, std::string(parcel_id));
}

}  // namespace sarfuse
