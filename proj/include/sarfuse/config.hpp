#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "sarfuse/cloudsim.hpp"
#include "sarfuse/detect.hpp"
#include "sarfuse/preprocess.hpp"
#include "sarfuse/sfmodel.hpp"

namespace sarfuse {

/// Sizes and protocol knobs of the evaluation experiments.
struct ExperimentConfig {
  double test_fraction = 0.4;
  int train_pixels_per_parcel = 40;
  int eval_pixels_per_parcel = 10;
  int ablation_train_pixels_per_parcel = 40;
  int detector_train_pixels_per_parcel = 20;
  int folds = 3;
  int tolerance_days = 12;
  int hidden_min_steps = 3;  // steps hidden after the pre-event step
  int hidden_max_steps = 7;
  int generalization_holdout_region = -1;  // -1: last region

  void validate() const;
};

struct RunConfig {
  std::uint64_t seed = 42;
  preprocess::OutlierParams outliers;
  preprocess::DensityCriteria density;
  sf::TrainConfig train;
  sf::TrainConfig detector_train;
  detect::Mda1Params mda1;
  detect::Mda2Params mda2;
  double cloud_filter_threshold = 0.15;
  double decode_threshold = 0.5;
  ExperimentConfig experiment;
  cloudsim::SynthConfig synth;

  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Missing keys keep defaults; unknown keys are a ValidationError.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

/// Environment variables named SARFUSE_<SECTION>_<KEY> (or SARFUSE_<KEY> for
/// top-level keys), upper-cased, override the matching config entries.
inline constexpr const char* kEnvPrefix = "SARFUSE_";
nlohmann::json apply_env_overrides(nlohmann::json j);

nlohmann::json arch_to_json(const sf::SfArchitecture& a);
sf::SfArchitecture arch_from_json(const nlohmann::json& j);

}  // namespace sarfuse
