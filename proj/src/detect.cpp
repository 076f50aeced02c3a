#include "sarfuse/detect.hpp"
#include "sarfuse/seed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sarfuse/error.hpp"
#include "sarfuse/interp.hpp"

namespace sarfuse::detect {

void Mda1Params::validate() const {
  if (!(drop_threshold > 0.0)) throw ValidationError("mda1 drop_threshold must be > 0");
}

void Mda2Params::validate() const {
  if (!(residual_threshold > 0.0)) throw ValidationError("mda2 residual_threshold must be > 0");
  if (!(peak_min_prominence > 0.0)) throw ValidationError("mda2 peak_min_prominence must be > 0");
}

EventSet mda1(const NdviSeries& series, const TemporalGrid& grid, const Mda1Params& params) {
  params.validate();
  EventSet out;
  int prev = -1;
  bool in_event = false;  // inside a decline that already produced an event
  for (int t = 0; t < static_cast<int>(series.size()); ++t) {
    if (!series[t]) continue;
    if (prev >= 0) {
      const double drop = *series[prev] - *series[t];
      if (drop <= 0.0) {
        in_event = false;
      } else if (drop >= params.drop_threshold) {
        if (in_event) {
          out.scores.back() = std::max(out.scores.back(), drop);
        } else {
          out.doys.push_back(grid.doy(t));
          out.scores.push_back(drop);
          in_event = true;
        }
      }
    }
    prev = t;
  }
  return out;
}

std::vector<int> envelope_peaks(std::span<const double> v, double min_prominence) {
  const int n = static_cast<int>(v.size());
  std::vector<int> peaks;
  if (n == 0) return peaks;
  const int global = static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
  for (int t = 1; t + 1 < n; ++t) {
    if (!(v[t] > v[t - 1])) continue;
    // Plateau: the peak is its first sample, provided it falls afterwards.
    int end = t;
    while (end + 1 < n && v[end + 1] == v[t]) ++end;
    if (end + 1 >= n || !(v[end + 1] < v[t])) continue;
    double left_min = v[t];
    for (int k = t - 1; k >= 0 && v[k] <= v[t]; --k) left_min = std::min(left_min, v[k]);
    double right_min = v[t];
    for (int k = end + 1; k < n && v[k] <= v[t]; ++k) right_min = std::min(right_min, v[k]);
    // A boundary with a higher value stops the search there; otherwise the edge does.
    if (v[t] - std::max(left_min, right_min) >= min_prominence) peaks.push_back(t);
    t = end;
  }
  if (std::find(peaks.begin(), peaks.end(), global) == peaks.end()) {
    peaks.insert(std::upper_bound(peaks.begin(), peaks.end(), global), global);
  }
  return peaks;
}

std::vector<double> peak_envelope(std::span<const double> v, const TemporalGrid& grid, const std::vector<int>& peaks) {
  const int n = static_cast<int>(v.size());
  std::vector<double> env(v.size());
  if (peaks.empty()) return std::vector<double>(v.begin(), v.end());
  for (int t = 0; t < n; ++t) {
    if (t <= peaks.front()) {
      env[t] = v[peaks.front()];
    } else if (t >= peaks.back()) {
      env[t] = v[peaks.back()];
    } else {
      const auto hi = std::upper_bound(peaks.begin(), peaks.end(), t);
      const int b = *hi;
      const int a = *(hi - 1);
      const double xa = grid.doy(a), xb = grid.doy(b), x = grid.doy(t);
      env[t] = v[a] + (v[b] - v[a]) * (x - xa) / (xb - xa);
    }
  }
  return env;
}

EventSet mda2(std::span<const double> v, const TemporalGrid& grid, const Mda2Params& params) {
  params.validate();
  if (v.size() != static_cast<std::size_t>(grid.length)) throw ValidationError("mda2: series length != grid length");
  EventSet out;
  const auto peaks = envelope_peaks(v, params.peak_min_prominence);
  if (peaks.size() < 2) return out;
  const auto env = peak_envelope(v, grid, peaks);
  const double thr = params.residual_threshold;
  for (int t = peaks.front() + 1; t < peaks.back(); ++t) {
    const double r = env[t] - v[t];
    const double r_prev = env[t - 1] - v[t - 1];
    if (r >= thr && r_prev < thr) {
      out.doys.push_back(grid.doy(t));
      out.scores.push_back(r);
    } else if (r >= thr && !out.empty()) {
      out.scores.back() = std::max(out.scores.back(), r);
    }
  }
  return out;
}

EventSet mda2(const NdviSeries& series, const TemporalGrid& grid, const Mda2Params& params) {
  std::vector<double> v(series.size());
  for (std::size_t t = 0; t < series.size(); ++t) {
    if (!series[t]) throw ValidationError("mda2 needs a fully present series (gap at step " + std::to_string(t) + ")");
    v[t] = *series[t];
  }
  return mda2(std::span<const double>(v), grid, params);
}

std::vector<double> detector_labels(const ParcelLabel& label, const TemporalGrid& grid) {
  std::vector<double> y(static_cast<std::size_t>(grid.length), 0.0);
  for (int doy : label.event_doys) {
    const auto idx = nearest_grid_index(grid, doy, std::max(doy - grid.start_doy, grid.last_doy() - doy) + 1);
    if (idx) y[static_cast<std::size_t>(*idx)] = 1.0;
  }
  return y;
}

EventSet decode_probabilities(std::span<const double> p, const TemporalGrid& grid, double threshold, int radius) {
  std::vector<int> order;
  for (int t = 0; t < static_cast<int>(p.size()); ++t) {
    if (p[t] >= threshold) order.push_back(t);
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return p[a] > p[b]; });
  std::vector<int> kept;
  for (int t : order) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](int k) { return std::abs(k - t) <= radius; });
    if (!suppressed) kept.push_back(t);
  }
  std::sort(kept.begin(), kept.end());
  EventSet out;
  for (int t : kept) {
    out.doys.push_back(grid.doy(t));
    out.scores.push_back(p[t]);
  }
  return out;
}

sf::SfArchitecture detector_architecture(int steps) {
  sf::SfArchitecture a;
  a.use_ndvi = true;
  a.sar_channels.clear();
  a.head = sf::Head::Detection;
  a.steps = steps;
  return a;
}

sf::TrainingSample make_detection_sample(const PixelSeries& filled, const std::vector<double>& labels,
                                         const sf::NormStats& stats, const sf::SfArchitecture& arch,
                                         double pos_weight) {
  if (labels.size() != filled.ndvi.size()) throw ValidationError("detection labels length mismatch");
  if (!(pos_weight > 0.0)) throw ValidationError("pos_weight must be > 0");
  sf::TrainingSample s;
  s.input = sf::encode_inputs(filled, stats, arch);
  s.group = derive_seed(0, filled.parcel_id);
  s.target = labels;
  s.weight.resize(labels.size());
  for (std::size_t t = 0; t < labels.size(); ++t) s.weight[t] = labels[t] > 0.5 ? pos_weight : 1.0;
  return s;
}

DnnResult dnn_detect(const sf::SfModel& detector, const PixelSeries& series, const TemporalGrid& grid,
                     double decode_threshold) {
  if (!detector.trained) throw RuntimeError("detector has not been trained");
  if (detector.arch().head != sf::Head::Detection) throw ValidationError("dnn_detect needs a detection-head model");
  const sf::EncodedSample e = sf::encode_inputs(series, detector.stats, detector.arch());
  const sf::EncodedSample* ptr = &e;
  DnnResult r;
  r.probabilities =
      sf::predict(detector, std::span<const sf::EncodedSample* const>(&ptr, 1), sf::Execution::Serial).front();
  r.events = decode_probabilities(r.probabilities, grid, decode_threshold);
  return r;
}

std::string_view algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Mda1: return "mda1";
    case Algorithm::Mda2: return "mda2";
    case Algorithm::Dnn: return "dnn";
  }
  return "?";
}

Algorithm algorithm_from_name(std::string_view name) {
  if (name == "mda1") return Algorithm::Mda1;
  if (name == "mda2") return Algorithm::Mda2;
  if (name == "dnn") return Algorithm::Dnn;
  throw ValidationError("unknown detector '" + std::string(name) + "' (mda1|mda2|dnn)");
}

std::string_view fill_name(FillMethod f) {
  switch (f) {
    case FillMethod::None: return "none";
    case FillMethod::Linear: return "linear";
    case FillMethod::Akima: return "akima";
    case FillMethod::Quadratic: return "quadratic";
    case FillMethod::Sf: return "sf";
  }
  return "?";
}

FillMethod fill_from_name(std::string_view name) {
  if (name == "none") return FillMethod::None;
  if (name == "linear") return FillMethod::Linear;
  if (name == "akima") return FillMethod::Akima;
  if (name == "quadratic") return FillMethod::Quadratic;
  if (name == "sf") return FillMethod::Sf;
  throw ValidationError("unknown fill method '" + std::string(name) + "' (none|linear|akima|quadratic|sf)");
}

PixelSeries fill_series(const PixelSeries& series, const TemporalGrid& grid, FillMethod fill, const DetectContext& ctx) {
  PixelSeries out = series;
  std::vector<double> values;
  switch (fill) {
    case FillMethod::None: return out;
    case FillMethod::Linear: values = interp::fill_linear(series.ndvi, grid); break;
    case FillMethod::Akima: values = interp::fill_akima(series.ndvi, grid); break;
    case FillMethod::Quadratic: values = interp::fill_quadratic(series.ndvi, grid); break;
    case FillMethod::Sf:
      if (ctx.gapfill_model == nullptr) throw ValidationError("sf fill needs a gap-filling model");
      values = sf::gapfill_sf(*ctx.gapfill_model, series, ctx.gapfill);
      break;
  }
  for (std::size_t t = 0; t < values.size(); ++t) out.ndvi[t] = values[t];
  return out;
}

EventSet detect_series(const PixelSeries& series, const TemporalGrid& grid, Algorithm algorithm, FillMethod fill,
                       const DetectContext& ctx) {
  const PixelSeries filled = fill_series(series, grid, fill, ctx);
  switch (algorithm) {
    case Algorithm::Mda1: return mda1(filled.ndvi, grid, ctx.mda1);
    case Algorithm::Mda2: return mda2(filled.ndvi, grid, ctx.mda2);
    case Algorithm::Dnn:
      if (ctx.detector == nullptr) throw ValidationError("dnn detection needs a trained detector");
      return dnn_detect(*ctx.detector, filled, grid, ctx.decode_threshold).events;
  }
  return {};
}

EventSet detect_parcel(const Dataset& dataset, std::string_view parcel_id, Algorithm algorithm, FillMethod fill,
                       const DetectContext& ctx) {
  return detect_series(parcel_series(dataset, parcel_id), dataset.grid, algorithm, fill, ctx);
}

}  // namespace sarfuse::detect
