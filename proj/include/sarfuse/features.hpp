#pragma once

#include <array>

#include "sarfuse/core.hpp"

namespace sarfuse::features {

/// One Sentinel-1 acquisition for a pixel, backscatter in linear power.
struct RawSarSample {
  double sigma0_vv_lin = 0.0;
  double sigma0_vh_lin = 0.0;
  double coh_vv = 0.0;
  double coh_vh = 0.0;
};

double to_db(double sigma_lin);
double from_db(double sigma_db);

/// Linear-power backscatter ratio VV / VH.
double sigma0_ratio(double vv_lin, double vh_lin);
/// VH - VV in dB, i.e. a log ratio.
double sigma0_cross_ratio(double vh_db, double vv_db);
/// Geometric mean of the two coherences.
double mixed_coherence(double coh_vv, double coh_vh);
/// Radar vegetation index 4 VH / (VH + VV), linear power, in [0, 4].
double rvi(double vh_lin, double vv_lin);
double ndvi(double nir, double red);

/// All eight model channels for one acquisition, ordered as `Channel`.
std::array<double, kChannelCount> derive_channels(const RawSarSample& s);

/// Fills the four derived channels of `px` from its stored dB backscatter and
/// coherence channels.
void derive_in_place(PixelSeries& px);

}  // namespace sarfuse::features
