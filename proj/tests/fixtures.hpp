#pragma once

#include <string>
#include <vector>

#include "sarfuse/experiments.hpp"
#include "sarfuse/sfmodel.hpp"

namespace testing {

// Small SF gap-filling model trained once per process on a 160-parcel synthetic set.
struct TrainedGapfill {
  sarfuse::evalx::ExperimentData data;
  std::vector<std::string> parcels;
  sarfuse::evalx::GapfillTraining fit;
};

sarfuse::sf::SfArchitecture light_arch();
const TrainedGapfill& trained_gapfill();

}  // namespace testing
