#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sarfuse {

/// Fixed acquisition calendar: step i sits on day-of-year start_doy + i * step_days.
/// Defaults describe the 6-day, 29-step season starting on April 9th (DoY 100).
struct TemporalGrid {
  int start_doy = 100;
  int step_days = 6;
  int length = 29;

  void validate() const;
  int doy(int index) const;
  int last_doy() const { return start_doy + (length - 1) * step_days; }
  bool operator==(const TemporalGrid&) const = default;
};

/// Day-of-year of a grid step. Throws ValidationError when index is out of range.
int grid_doy(const TemporalGrid& grid, int index);

/// Closest grid step to `doy` if it lies within `max_distance_days`, ties going to
/// the earlier step.
std::optional<int> nearest_grid_index(const TemporalGrid& grid, int doy, int max_distance_days);

/// NDVI values per step; an empty optional marks a cloudy or unaligned step.
using NdviSeries = std::vector<std::optional<double>>;

enum class Channel : int {
  Sigma0VvDb = 0,
  Sigma0VhDb,
  CohVv,
  CohVh,
  Sigma0Ratio,
  Sigma0CrossRatioDb,
  MixedCoherence,
  Rvi,
};
inline constexpr int kChannelCount = 8;
inline constexpr std::array<Channel, kChannelCount> kAllChannels{
    Channel::Sigma0VvDb,  Channel::Sigma0VhDb,         Channel::CohVv,
    Channel::CohVh,       Channel::Sigma0Ratio,        Channel::Sigma0CrossRatioDb,
    Channel::MixedCoherence, Channel::Rvi};

std::string_view channel_name(Channel c);
Channel channel_from_name(std::string_view name);

struct PixelSeries {
  std::string pixel_id;
  std::string parcel_id;
  std::string region_id;
  NdviSeries ndvi;
  std::array<std::vector<double>, kChannelCount> channels;

  const std::vector<double>& channel(Channel c) const { return channels[static_cast<int>(c)]; }
  std::vector<double>& channel(Channel c) { return channels[static_cast<int>(c)]; }
  std::size_t present_count() const;

  /// Checks lengths against the grid plus the NDVI and coherence ranges.
  void validate(const TemporalGrid& grid) const;
};

/// true = cloudy / hidden.
struct CloudMask {
  std::vector<std::uint8_t> bits;

  std::size_t size() const { return bits.size(); }
  bool cloudy(std::size_t i) const { return bits[i] != 0; }
  double coverage() const;
  bool operator==(const CloudMask&) const = default;
};

struct ParcelLabel {
  std::string parcel_id;
  std::vector<int> event_doys;  // sorted, empty means unmown
};

struct Dataset {
  TemporalGrid grid;
  std::vector<PixelSeries> pixels;
  std::vector<ParcelLabel> labels;

  /// Pixel ids unique, per-pixel invariants, labeled parcels present, label DoYs
  /// sorted and inside the season.
  void validate() const;

  /// Parcel ids in order of first appearance.
  std::vector<std::string> parcel_ids() const;
  /// Indices into `pixels` grouped by parcel id.
  std::unordered_map<std::string, std::vector<std::size_t>> parcel_members() const;
  const ParcelLabel* find_label(std::string_view parcel_id) const;
};

/// Channel-wise per-step mean over a parcel's pixels. A step's NDVI is present only
/// when more than half of the member pixels observe it.
PixelSeries parcel_series(const Dataset& dataset, std::string_view parcel_id);
PixelSeries aggregate_pixels(std::span<const PixelSeries* const> members, std::string parcel_id);

}  // namespace sarfuse
