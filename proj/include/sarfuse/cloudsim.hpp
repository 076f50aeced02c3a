#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sarfuse/core.hpp"

namespace sarfuse::cloudsim {

using Rng = std::mt19937_64;

/// Cloud masks of one region; bootstrap draws sample from here.
struct MaskPool {
  std::string region_id;
  std::vector<CloudMask> masks;

  double mean_coverage() const;
  void validate(std::size_t length) const;
};

/// Uniform draw from the pool.
CloudMask bootstrap_mask(const MaskPool& pool, Rng& rng);

/// NDVI hidden where the mask is set; SAR channels untouched.
PixelSeries apply_mask(const PixelSeries& pixel, const CloudMask& mask);

/// Markov-chain masks whose per-step cloud probability follows a U-shaped
/// seasonal profile (cloudier at both season edges). The base level is bisected
/// so the pool's mean coverage hits `target_coverage`.
struct MaskPoolConfig {
  int size = 200;
  double target_coverage = 0.45;
  double edge_amplitude = 0.5;  // relative excess cloudiness at the season edges
  double persistence = 0.5;     // 0 independent steps, -> 1 long cloudy spells
  std::uint64_t seed = 1;

  void validate() const;
};

MaskPool generate_mask_pool(const std::string& region_id, const TemporalGrid& grid, const MaskPoolConfig& cfg);

struct SynthConfig {
  int n_parcels = 100;
  int pixels_per_parcel = 10;
  int n_regions = 4;
  std::array<double, 3> mow_probabilities{0.2, 0.6, 0.2};  // P(0), P(1), P(2) events
  int event_first_doy = 152;
  int event_last_doy = 196;
  int min_event_separation_days = 30;
  double drop_depth_min = 0.25;
  double drop_depth_max = 0.45;
  double half_recovery_days = 10.0;
  double noise_sd = 0.02;
  double pixel_jitter = 0.02;  // per-pixel NDVI offset spread
  double cirrus_rate = 0.0;
  double cirrus_depth_min = 0.15;
  double cirrus_depth_max = 0.4;
  double real_gap_rate = 0.08;  // cloud gaps already present in the "observed" data
  int mask_pool_size = 200;
  double mask_coverage = 0.45;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Smooth seasonal curve of one parcel.
struct Phenology {
  double base = 0.2;
  double amplitude = 0.6;
  double rise_doy = 120.0;
  double rise_days = 8.0;
  double fall_doy = 270.0;
  double fall_days = 12.0;

  double operator()(double doy) const;
};

struct MowingEvent {
  int doy = 0;
  double depth = 0.0;
};

/// NDVI deficit of one event at `doy`: depth at the cut, halving every `half_days`.
double mowing_deficit(const MowingEvent& event, double doy, double half_days);

struct ParcelTruth {
  std::string parcel_id;
  std::string region_id;
  Phenology phenology;
  std::vector<MowingEvent> events;
  std::vector<int> cirrus_steps;
};

struct SynthResult {
  Dataset dataset;
  std::vector<MaskPool> pools;  // one per region, in region order
  std::vector<ParcelTruth> truth;
};

/// Pure function of the config: parcels are generated from independent sub-seeds.
SynthResult synth_dataset(const SynthConfig& cfg, const TemporalGrid& grid = {});

std::string region_name(int index);

}  // namespace sarfuse::cloudsim
