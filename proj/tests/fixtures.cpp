#include "fixtures.hpp"

#include "sarfuse/cloudsim.hpp"
#include "sarfuse/config.hpp"

namespace testing {

using namespace sarfuse;

sf::SfArchitecture light_arch() {
  sf::SfArchitecture a;
  a.sar_channels = {Channel::CohVv, Channel::CohVh, Channel::Sigma0VhDb};
  return a;
}

const TrainedGapfill& trained_gapfill() {
  static const TrainedGapfill t = [] {
    cloudsim::SynthConfig sc;
    sc.n_parcels = 160;
    sc.pixels_per_parcel = 12;
    sc.seed = 21;
    auto r = cloudsim::synth_dataset(sc);
    TrainedGapfill out{{std::move(r.dataset), std::move(r.pools)}, {}, {}};
    out.parcels = out.data.dataset.parcel_ids();
    out.fit = evalx::train_gapfill(out.data, out.parcels, 12, light_arch(), RunConfig{}, 5);
    return out;
  }();
  return t;
}

}  // namespace testing
