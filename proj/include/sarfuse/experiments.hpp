#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "sarfuse/cloudsim.hpp"
#include "sarfuse/config.hpp"
#include "sarfuse/detect.hpp"
#include "sarfuse/evalx.hpp"
#include "sarfuse/sfmodel.hpp"

namespace sarfuse::evalx {

struct ExperimentData {
  Dataset dataset;
  std::vector<cloudsim::MaskPool> pools;
};

const cloudsim::MaskPool& pool_for_region(const std::vector<cloudsim::MaskPool>& pools, const std::string& region);

struct ParcelSplit {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

/// Per-region shuffle, the first `test_fraction` of each region goes to test.
ParcelSplit split_parcels(const Dataset& dataset, double test_fraction, std::uint64_t seed);

/// Up to `per_parcel` seeded-random pixels of each listed parcel.
std::vector<const PixelSeries*> sample_pixels(const Dataset& dataset, const std::vector<std::string>& parcels,
                                              int per_parcel, std::uint64_t seed);

/// One bootstrapped mask per parcel, shared by all its pixels.
std::unordered_map<std::string, CloudMask> parcel_masks(const ExperimentData& data,
                                                        const std::vector<std::string>& parcels, std::uint64_t seed);

/// SF fill of many series at once (observed values kept, no cloud filter).
std::vector<std::vector<double>> sf_fill_batch(const sf::SfModel& model, std::span<const PixelSeries* const> pixels);

struct GapfillTraining {
  sf::SfModel model;
  sf::TrainReport report;
  std::size_t samples = 0;
  std::size_t density_rejected = 0;
  double mean_mask_coverage = 0.0;
};

/// Outlier pass, density filter, Akima target, bootstrapped parcel masks, train.
GapfillTraining train_gapfill(const ExperimentData& data, const std::vector<std::string>& parcels, int per_parcel,
                              const sf::SfArchitecture& arch, const RunConfig& cfg, std::uint64_t seed,
                              sf::Execution exec = sf::Execution::Parallel);

struct MethodScore {
  std::string method;
  double mae = 0.0;
  double r2 = 0.0;
  double median_pixel_mae = 0.0;
};

struct GapfillComparison {
  std::vector<MethodScore> methods;  // sf, linear, akima, quadratic
  std::size_t pixels = 0;
  std::size_t masked_steps = 0;
  std::size_t skipped_pixels = 0;  // too few visible observations for Akima
  double mean_mask_coverage = 0.0;

  const MethodScore& score(const std::string& method) const;
};

/// Masked-step errors of SF and the interpolators on held-out pixels.
GapfillComparison compare_gapfill(const sf::SfModel& model, const ExperimentData& data,
                                  const std::vector<std::string>& parcels, const RunConfig& cfg, std::uint64_t seed,
                                  bool interpolators = true);

struct FeatureSubset {
  std::string name;
  bool ndvi = false;
  bool coherence = false;
  bool sigma0 = false;
};

/// All non-empty combinations of {NDVI, coherence, sigma0}.
std::vector<FeatureSubset> feature_subsets();
sf::SfArchitecture subset_architecture(const FeatureSubset& subset, int steps);

struct AblationRow {
  FeatureSubset subset;
  double mae = 0.0;
  double r2 = 0.0;
  int epochs = 0;
  std::vector<double> validation_loss;
};

std::vector<AblationRow> ablation_experiment(const ExperimentData& data, const ParcelSplit& split,
                                             const RunConfig& cfg, std::uint64_t seed);

struct HiddenRecord {
  std::string parcel_id;
  int event_doy = 0;
  int first_hidden_step = 0;
  int hidden_steps = 0;
};

struct HiddenFillResult {
  detect::FillMethod fill = detect::FillMethod::None;
  std::vector<MatchResult> by_tolerance;  // tolerance 0, 1, ..., max days
  MatchResult at_tolerance;
  Prf scores;
};

struct HiddenEventResult {
  std::vector<HiddenFillResult> fills;
  std::vector<HiddenRecord> log;

  const HiddenFillResult& fill(detect::FillMethod f) const;
};

/// Hides the pre-event step plus a seeded 3..7 following steps on single-event
/// parcels, then fills and detects on the parcel series.
HiddenEventResult hidden_event_experiment(const Dataset& dataset, const std::vector<std::string>& parcels,
                                          const std::vector<detect::FillMethod>& fills, detect::Algorithm algorithm,
                                          const detect::DetectContext& ctx, const RunConfig& cfg, std::uint64_t seed);

struct CirrusResult {
  MatchResult raw;
  MatchResult filtered;
  Prf raw_scores;
  Prf filtered_scores;
  int parcels = 0;
};

/// MDA I on raw parcel series versus SF-filled series in cloud-filter mode.
CirrusResult cirrus_experiment(const Dataset& dataset, const std::vector<std::string>& parcels,
                               const sf::SfModel& gapfill, const RunConfig& cfg);

struct FoldResult {
  std::vector<std::string> parcels;
  double mean_event_doy = 0.0;
  std::size_t train_samples = 0;
  double pos_weight = 0.0;
  MatchResult dnn;
  MatchResult mda2;
  MatchResult mda1;
};

struct DetectorCvResult {
  std::vector<FoldResult> folds;
  MatchResult dnn;
  MatchResult mda2;
  MatchResult mda1;
  BinnedReport dnn_bins;
  BinnedReport mda2_bins;
};

/// Event-date-stratified folds: parcels sorted by first event day (unmown last)
/// are dealt round-robin.
std::vector<std::vector<std::string>> stratified_folds(const Dataset& dataset, const std::vector<std::string>& parcels,
                                                       int folds);

/// Parcel-level k-fold comparison of the DNN detector and MDA I/II, all on
/// SF-filled series under bootstrapped cloud masks.
DetectorCvResult detector_cv(const ExperimentData& data, const std::vector<std::string>& parcels,
                             const sf::SfModel& gapfill, const RunConfig& cfg, std::uint64_t seed);

struct GeneralizationRow {
  std::vector<std::string> regions;
  std::size_t pixels = 0;
  double mae = 0.0;
};

struct GeneralizationResult {
  std::string holdout_region;
  std::vector<GeneralizationRow> rows;
};

/// Trains on every non-empty subset of the non-held-out regions and scores
/// masked-step MAE on the held-out region.
GeneralizationResult generalization_experiment(const ExperimentData& data, const RunConfig& cfg, std::uint64_t seed);

nlohmann::json to_json(const MatchResult& m);
nlohmann::json to_json(const Prf& p);
nlohmann::json to_json(const BinnedReport& b);
nlohmann::json to_json(const GapfillComparison& g);
nlohmann::json to_json(const std::vector<AblationRow>& rows);
nlohmann::json to_json(const HiddenEventResult& h);
nlohmann::json to_json(const CirrusResult& c);
nlohmann::json to_json(const DetectorCvResult& d);
nlohmann::json to_json(const GeneralizationResult& g);

/// Experiment names accepted by run_experiment.
const std::vector<std::string>& experiment_names();

/// Runs one named experiment end to end (split, train, evaluate) from the data
/// and config alone; the returned metrics are a pure function of both.
nlohmann::json run_experiment(const std::string& name, const ExperimentData& data, const RunConfig& cfg);

}  // namespace sarfuse::evalx
