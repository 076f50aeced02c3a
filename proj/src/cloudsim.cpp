#include "sarfuse/cloudsim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sarfuse/error.hpp"
#include "sarfuse/features.hpp"
#include "sarfuse/preprocess.hpp"
#include "sarfuse/seed.hpp"

namespace sarfuse::cloudsim {

double MaskPool::mean_coverage() const {
  if (masks.empty()) return 0.0;
  double s = 0.0;
  for (const auto& m : masks) s += m.coverage();
  return s / static_cast<double>(masks.size());
}

void MaskPool::validate(std::size_t length) const {
  if (masks.empty()) throw ValidationError("mask pool '" + region_id + "' is empty");
  for (const auto& m : masks) {
    if (m.size() != length) throw ValidationError("mask pool '" + region_id + "': mask length != grid length");
  }
}

CloudMask bootstrap_mask(const MaskPool& pool, Rng& rng) {
  if (pool.masks.empty()) throw ValidationError("cannot bootstrap from an empty mask pool");
  std::uniform_int_distribution<std::size_t> pick(0, pool.masks.size() - 1);
  return pool.masks[pick(rng)];
}

PixelSeries apply_mask(const PixelSeries& pixel, const CloudMask& mask) {
  if (mask.size() != pixel.ndvi.size()) throw ValidationError("apply_mask: mask length != series length");
  PixelSeries out = pixel;
  for (std::size_t t = 0; t < mask.size(); ++t) {
    if (mask.cloudy(t)) out.ndvi[t].reset();
  }
  return out;
}

void MaskPoolConfig::validate() const {
  if (size < 1) throw ValidationError("mask pool size must be >= 1");
  if (!(target_coverage >= 0.0 && target_coverage <= 1.0)) throw ValidationError("target coverage outside [0, 1]");
  if (!(edge_amplitude >= 0.0)) throw ValidationError("edge_amplitude must be >= 0");
  if (!(persistence >= 0.0 && persistence < 1.0)) throw ValidationError("persistence must lie in [0, 1)");
}

namespace {

// Per-step cloud probability for base level `level`; U-shaped over the season.
std::vector<double> seasonal_profile(int length, double level, double edge_amplitude) {
  std::vector<double> p(static_cast<std::size_t>(length));
  for (int t = 0; t < length; ++t) {
    const double x = length > 1 ? static_cast<double>(t) / (length - 1) : 0.0;
    const double shape = 1.0 + edge_amplitude * std::cos(2.0 * M_PI * x);
    p[static_cast<std::size_t>(t)] = std::clamp(level * shape, 0.0, 1.0);
  }
  return p;
}

// Common random numbers make the result monotone in `level`, which the bisection relies on.
std::vector<CloudMask> markov_masks(const std::vector<std::vector<double>>& uniforms, const std::vector<double>& p,
                                    double persistence) {
  std::vector<CloudMask> masks;
  masks.reserve(uniforms.size());
  for (const auto& u : uniforms) {
    CloudMask m;
    m.bits.resize(p.size());
    bool prev = false;
    for (std::size_t t = 0; t < p.size(); ++t) {
      const double q = prev ? persistence + (1.0 - persistence) * p[t] : (1.0 - persistence) * p[t];
      prev = u[t] < q;
      m.bits[t] = prev ? 1 : 0;
    }
    masks.push_back(std::move(m));
  }
  return masks;
}

double pool_coverage(const std::vector<CloudMask>& masks) {
  double s = 0.0;
  for (const auto& m : masks) s += m.coverage();
  return masks.empty() ? 0.0 : s / static_cast<double>(masks.size());
}

}  // namespace

MaskPool generate_mask_pool(const std::string& region_id, const TemporalGrid& grid, const MaskPoolConfig& cfg) {
  cfg.validate();
  grid.validate();
  Rng rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<double>> uniforms(static_cast<std::size_t>(cfg.size),
                                            std::vector<double>(static_cast<std::size_t>(grid.length)));
  for (auto& row : uniforms) {
    for (auto& u : row) u = unit(rng);
  }
  double lo = 0.0;
  double hi = 4.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    const auto masks = markov_masks(uniforms, seasonal_profile(grid.length, mid, cfg.edge_amplitude), cfg.persistence);
    (pool_coverage(masks) < cfg.target_coverage ? lo : hi) = mid;
  }
  MaskPool pool;
  pool.region_id = region_id;
  const auto below = markov_masks(uniforms, seasonal_profile(grid.length, lo, cfg.edge_amplitude), cfg.persistence);
  const auto above = markov_masks(uniforms, seasonal_profile(grid.length, hi, cfg.edge_amplitude), cfg.persistence);
  pool.masks = std::abs(pool_coverage(below) - cfg.target_coverage) <= std::abs(pool_coverage(above) - cfg.target_coverage)
                   ? below
                   : above;
  return pool;
}

void SynthConfig::validate() const {
  if (n_parcels < 1 || pixels_per_parcel < 1 || n_regions < 1) {
    throw ValidationError("n_parcels, pixels_per_parcel and n_regions must be >= 1");
  }
  double total = 0.0;
  for (double p : mow_probabilities) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("mow probabilities must lie in [0, 1]");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("mow probabilities must sum to 1");
  if (event_first_doy > event_last_doy) throw ValidationError("event window is empty");
  if (!(drop_depth_min >= 0.1 && drop_depth_max >= drop_depth_min)) {
    throw ValidationError("drop depth range must satisfy 0.1 <= min <= max");
  }
  if (!(half_recovery_days > 0.0)) throw ValidationError("half_recovery_days must be > 0");
  if (!(noise_sd >= 0.0 && pixel_jitter >= 0.0)) throw ValidationError("noise levels must be >= 0");
  for (double r : {cirrus_rate, real_gap_rate, mask_coverage}) {
    if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("rates must lie in [0, 1]");
  }
  if (!(cirrus_depth_min > 0.0 && cirrus_depth_max >= cirrus_depth_min)) throw ValidationError("bad cirrus depth range");
  if (min_event_separation_days < 1) throw ValidationError("min_event_separation_days must be >= 1");
  if (mask_pool_size < 1) throw ValidationError("mask_pool_size must be >= 1");
}

double Phenology::operator()(double doy) const {
  const double up = 1.0 / (1.0 + std::exp(-(doy - rise_doy) / rise_days));
  const double down = 1.0 / (1.0 + std::exp(-(doy - fall_doy) / fall_days));
  return base + amplitude * (up - down);
}

double mowing_deficit(const MowingEvent& event, double doy, double half_days) {
  if (doy < event.doy) return 0.0;
  return event.depth * std::exp2(-(doy - event.doy) / half_days);
}

std::string region_name(int index) { return "R" + std::to_string(index + 1); }

namespace {

struct RegionProfile {
  double rise_center;
  double amplitude_center;
  double vh_offset_db;
  double edge_amplitude;
  double persistence;
};

RegionProfile region_profile(int r) {
  return RegionProfile{112.0 + 6.0 * (r % 4), 0.52 + 0.04 * (r % 3), 0.6 * (r % 3) - 0.6, 0.3 + 0.15 * (r % 4),
                       0.35 + 0.1 * (r % 3)};
}

class Ar1 {
 public:
  Ar1(double phi, double sd) : phi_(phi), scale_(sd * std::sqrt(1.0 - phi * phi)), sd_(sd) {}
  double next(Rng& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    state_ = started_ ? phi_ * state_ + scale_ * z(rng) : sd_ * z(rng);
    started_ = true;
    return state_;
  }

 private:
  double phi_, scale_, sd_;
  double state_ = 0.0;
  bool started_ = false;
};

NdviSeries real_gaps(const SynthConfig& cfg, const TemporalGrid& grid, const RegionProfile& region, Rng& rng) {
  NdviSeries pattern(static_cast<std::size_t>(grid.length), 0.0);
  if (cfg.real_gap_rate <= 0.0) return pattern;
  const auto p = seasonal_profile(grid.length, cfg.real_gap_rate, region.edge_amplitude);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int attempt = 0; attempt < 50; ++attempt) {
    NdviSeries s(static_cast<std::size_t>(grid.length), 0.0);
    for (std::size_t t = 0; t < s.size(); ++t) {
      if (unit(rng) < p[t]) s[t].reset();
    }
    if (preprocess::passes_density(s, grid)) return s;
  }
  return pattern;
}

struct ParcelOutput {
  ParcelTruth truth;
  std::vector<PixelSeries> pixels;
};

ParcelOutput make_parcel(const SynthConfig& cfg, const TemporalGrid& grid, int index) {
  Rng rng(derive_seed(cfg.seed, "parcel", static_cast<std::uint64_t>(index)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto uniform = [&](double a, double b) { return a + (b - a) * unit(rng); };

  const int r = index % cfg.n_regions;
  const RegionProfile region = region_profile(r);
  ParcelOutput out;
  ParcelTruth& truth = out.truth;
  char id[32];
  std::snprintf(id, sizeof id, "P%05d", index);
  truth.parcel_id = id;
  truth.region_id = region_name(r);

  Phenology& ph = truth.phenology;
  ph.base = uniform(0.15, 0.28);
  ph.amplitude = region.amplitude_center + uniform(-0.08, 0.08);
  ph.rise_doy = region.rise_center + 5.0 * gauss(rng);
  ph.rise_days = uniform(6.0, 12.0);
  ph.fall_doy = uniform(255.0, 290.0);
  ph.fall_days = uniform(10.0, 20.0);

  const double u = unit(rng);
  const int n_events = u < cfg.mow_probabilities[0] ? 0 : (u < cfg.mow_probabilities[0] + cfg.mow_probabilities[1] ? 1 : 2);
  if (n_events >= 1) {
    std::uniform_int_distribution<int> day(cfg.event_first_doy, cfg.event_last_doy);
    truth.events.push_back({day(rng), uniform(cfg.drop_depth_min, cfg.drop_depth_max)});
  }
  if (n_events == 2) {
    std::uniform_int_distribution<int> gap(cfg.min_event_separation_days, cfg.min_event_separation_days + 20);
    const int second = std::min(truth.events[0].doy + gap(rng), grid.last_doy() - 2 * grid.step_days);
    truth.events.push_back({second, uniform(cfg.drop_depth_min, cfg.drop_depth_max)});
  }

  const NdviSeries gaps = real_gaps(cfg, grid, region, rng);
  std::vector<double> cirrus(static_cast<std::size_t>(grid.length), 0.0);
  for (int t = 0; t < grid.length; ++t) {
    const double roll = unit(rng);
    const double depth = uniform(cfg.cirrus_depth_min, cfg.cirrus_depth_max);
    if (gaps[static_cast<std::size_t>(t)] && roll < cfg.cirrus_rate) {
      cirrus[static_cast<std::size_t>(t)] = depth;
      truth.cirrus_steps.push_back(t);
    }
  }

  // Parcel-wide SAR terms (soil moisture, canopy structure) shared by all
  // channels of a kind, plus per-parcel gain: SAR alone cannot pin the NDVI level.
  const double soil = gauss(rng);
  const double structure = gauss(rng);
  const double gain = std::clamp(1.0 + 0.25 * gauss(rng), 0.5, 1.5);
  const double off_vh = region.vh_offset_db + 1.6 * soil;
  const double off_vv = 0.6 * region.vh_offset_db + 1.3 * soil;
  const double off_coh = 0.08 * structure;
  std::vector<double> dip_db, jump;
  for (std::size_t e = 0; e < truth.events.size(); ++e) {
    dip_db.push_back(uniform(1.0, 3.0));
    jump.push_back(uniform(0.1, 0.3));
  }

  for (int k = 0; k < cfg.pixels_per_parcel; ++k) {
    PixelSeries px;
    std::snprintf(id, sizeof id, "%s_%03d", truth.parcel_id.c_str(), k);
    px.pixel_id = id;
    px.parcel_id = truth.parcel_id;
    px.region_id = truth.region_id;
    px.ndvi.resize(static_cast<std::size_t>(grid.length));
    for (auto& c : px.channels) c.resize(static_cast<std::size_t>(grid.length));
    const double jitter = cfg.pixel_jitter * gauss(rng);
    const double pix_vh = 0.3 * gauss(rng);
    const double pix_vv = 0.3 * gauss(rng);
    Ar1 n_vh(0.6, 0.7), n_vv(0.6, 0.6), n_cvv(0.5, 0.04), n_cvh(0.5, 0.04);
    for (int t = 0; t < grid.length; ++t) {
      const auto ts = static_cast<std::size_t>(t);
      const double doy = grid.doy(t);
      double veg = ph(doy) + jitter;
      double dip = 0.0;
      double coh_jump = 0.0;
      for (std::size_t e = 0; e < truth.events.size(); ++e) {
        const auto& ev = truth.events[e];
        veg -= mowing_deficit(ev, doy, cfg.half_recovery_days);
        if (doy >= ev.doy) {
          dip += dip_db[e] * std::exp(-(doy - ev.doy) / 8.0);
          coh_jump += jump[e] * std::exp(-(doy - ev.doy) / 9.0);
        }
      }
      veg = std::clamp(veg, 0.02, 0.98);
      const double noise = cfg.noise_sd > 0.0 ? cfg.noise_sd * gauss(rng) : 0.0;
      if (gaps[ts]) px.ndvi[ts] = std::clamp(veg + noise - cirrus[ts], -1.0, 1.0);

      px.channel(Channel::Sigma0VhDb)[ts] = -24.0 + 9.0 * gain * veg + off_vh + pix_vh - dip + n_vh.next(rng);
      px.channel(Channel::Sigma0VvDb)[ts] = -15.0 + 5.0 * gain * veg + off_vv + pix_vv - 0.6 * dip + n_vv.next(rng);
      px.channel(Channel::CohVv)[ts] = std::clamp(0.75 - 0.6 * gain * veg + off_coh + coh_jump + n_cvv.next(rng), 0.0, 1.0);
      px.channel(Channel::CohVh)[ts] =
          std::clamp(0.6 - 0.5 * gain * veg + off_coh + 0.8 * coh_jump + n_cvh.next(rng), 0.0, 1.0);
    }
    features::derive_in_place(px);
    out.pixels.push_back(std::move(px));
  }
  return out;
}

}  // namespace

SynthResult synth_dataset(const SynthConfig& cfg, const TemporalGrid& grid) {
  cfg.validate();
  grid.validate();
  std::vector<ParcelOutput> parcels(static_cast<std::size_t>(cfg.n_parcels));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < cfg.n_parcels; ++i) parcels[static_cast<std::size_t>(i)] = make_parcel(cfg, grid, i);

  SynthResult result;
  result.dataset.grid = grid;
  result.dataset.pixels.reserve(static_cast<std::size_t>(cfg.n_parcels) * cfg.pixels_per_parcel);
  for (auto& p : parcels) {
    ParcelLabel label{p.truth.parcel_id, {}};
    for (const auto& e : p.truth.events) label.event_doys.push_back(e.doy);
    std::sort(label.event_doys.begin(), label.event_doys.end());
    result.dataset.labels.push_back(std::move(label));
    for (auto& px : p.pixels) result.dataset.pixels.push_back(std::move(px));
    result.truth.push_back(std::move(p.truth));
  }
  for (int r = 0; r < cfg.n_regions; ++r) {
    MaskPoolConfig pc;
    pc.size = cfg.mask_pool_size;
    pc.target_coverage = cfg.mask_coverage;
    pc.edge_amplitude = region_profile(r).edge_amplitude;
    pc.persistence = region_profile(r).persistence;
    pc.seed = derive_seed(cfg.seed, "mask-pool", static_cast<std::uint64_t>(r));
    result.pools.push_back(generate_mask_pool(region_name(r), grid, pc));
  }
  return result;
}

}  // namespace sarfuse::cloudsim
