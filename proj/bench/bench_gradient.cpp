#include <benchmark/benchmark.h>

#include <vector>

#include "sarfuse/cloudsim.hpp"
#include "sarfuse/preprocess.hpp"
#include "sarfuse/sfmodel.hpp"

namespace {

using namespace sarfuse;

struct Fixture {
  sf::SfModel model{sf::SfArchitecture{}, 3};
  std::vector<sf::TrainingSample> samples;
  std::vector<const sf::TrainingSample*> batch;

  Fixture() {
    cloudsim::SynthConfig cfg;
    cfg.n_parcels = 32;
    cfg.pixels_per_parcel = 8;
    const auto syn = cloudsim::synth_dataset(cfg);
    std::vector<const PixelSeries*> px;
    for (const auto& p : syn.dataset.pixels) px.push_back(&p);
    model.stats = sf::NormStats::compute(px);
    cloudsim::Rng rng(1);
    for (const auto* p : px) {
      const auto target = preprocess::build_target(p->ndvi, syn.dataset.grid);
      const auto mask = cloudsim::bootstrap_mask(syn.pools.front(), rng);
      samples.push_back(sf::make_gapfill_sample(*p, target.values, target.observed, mask, model.stats, model.arch(),
                                                sf::TrainConfig{}));
    }
    for (const auto& s : samples) batch.push_back(&s);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void run(benchmark::State& state, sf::Execution exec) {
  auto& f = fixture();
  std::vector<double> grad(f.model.params().size());
  for (auto _ : state) {
    benchmark::DoNotOptimize(sf::loss_and_gradient(f.model, f.batch, grad, exec, 32));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.batch.size()));
}

void BM_LossGradientSerial(benchmark::State& state) { run(state, sf::Execution::Serial); }
void BM_LossGradientParallel(benchmark::State& state) { run(state, sf::Execution::Parallel); }

BENCHMARK(BM_LossGradientSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LossGradientParallel)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
