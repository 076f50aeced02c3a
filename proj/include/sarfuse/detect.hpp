#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sarfuse/core.hpp"
#include "sarfuse/sfmodel.hpp"

namespace sarfuse::detect {

/// Detected events of one series, sorted by day; scores are detector-specific.
struct EventSet {
  std::vector<int> doys;
  std::vector<double> scores;

  std::size_t size() const { return doys.size(); }
  bool empty() const { return doys.empty(); }
};

struct Mda1Params {
  double drop_threshold = 0.15;
  void validate() const;
};

struct Mda2Params {
  double residual_threshold = 0.15;
  double peak_min_prominence = 0.05;
  void validate() const;
};

/// Drops between consecutive present observations of at least the threshold.
/// Qualifying drops inside one uninterrupted decline form one event, dated at the
/// first of them; the score is the largest single drop.
EventSet mda1(const NdviSeries& series, const TemporalGrid& grid, const Mda1Params& params = {});

/// Peak indices kept by mda2: local maxima with enough prominence plus the
/// global maximum, ascending.
std::vector<int> envelope_peaks(std::span<const double> values, double min_prominence);

/// Linear envelope through the peaks, constant beyond the first and last one.
std::vector<double> peak_envelope(std::span<const double> values, const TemporalGrid& grid,
                                  const std::vector<int>& peaks);

/// Residuals from the peak envelope. An event starts where the residual climbs
/// to the threshold (up-crossing) strictly between the first and last peak;
/// the score is the excursion's largest residual.
EventSet mda2(std::span<const double> values, const TemporalGrid& grid, const Mda2Params& params = {});
EventSet mda2(const NdviSeries& series, const TemporalGrid& grid, const Mda2Params& params = {});

/// 1 at the grid step nearest each labeled event.
std::vector<double> detector_labels(const ParcelLabel& label, const TemporalGrid& grid);

/// Local maxima at or above the threshold, greedy non-maximum suppression over
/// +-radius steps (highest first, earlier step on ties).
EventSet decode_probabilities(std::span<const double> probabilities, const TemporalGrid& grid,
                              double threshold = 0.5, int radius = 2);

/// The NDVI-only SF architecture with a sigmoid head.
sf::SfArchitecture detector_architecture(int steps = 29);

/// Detector sample: `filled` NDVI as input, labels as target, positives weighted
/// by `pos_weight`.
sf::TrainingSample make_detection_sample(const PixelSeries& filled, const std::vector<double>& labels,
                                         const sf::NormStats& stats, const sf::SfArchitecture& arch,
                                         double pos_weight);

struct DnnResult {
  EventSet events;
  std::vector<double> probabilities;
};

DnnResult dnn_detect(const sf::SfModel& detector, const PixelSeries& series, const TemporalGrid& grid,
                     double decode_threshold = 0.5);

enum class Algorithm { Mda1, Mda2, Dnn };
enum class FillMethod { None, Linear, Akima, Quadratic, Sf };

std::string_view algorithm_name(Algorithm a);
Algorithm algorithm_from_name(std::string_view name);
std::string_view fill_name(FillMethod f);
FillMethod fill_from_name(std::string_view name);

struct DetectContext {
  Mda1Params mda1;
  Mda2Params mda2;
  double decode_threshold = 0.5;
  const sf::SfModel* gapfill_model = nullptr;  // needed for FillMethod::Sf
  sf::GapfillOptions gapfill;
  const sf::SfModel* detector = nullptr;  // needed for Algorithm::Dnn
};

/// Fills `series` (NDVI only; SAR is passed to the SF model) with the chosen
/// method. None leaves gaps in place.
PixelSeries fill_series(const PixelSeries& series, const TemporalGrid& grid, FillMethod fill, const DetectContext& ctx);

EventSet detect_series(const PixelSeries& series, const TemporalGrid& grid, Algorithm algorithm, FillMethod fill,
                       const DetectContext& ctx);

/// Aggregates the parcel's pixels, fills, then detects.
EventSet detect_parcel(const Dataset& dataset, std::string_view parcel_id, Algorithm algorithm, FillMethod fill,
                       const DetectContext& ctx);

}  // namespace sarfuse::detect
