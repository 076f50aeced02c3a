#include <cmath>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "helpers.hpp"
#include "sarfuse/cloudsim.hpp"
#include "sarfuse/config.hpp"
#include "sarfuse/error.hpp"
#include "sarfuse/experiments.hpp"
#include "sarfuse/sfmodel.hpp"

using namespace sarfuse;
using namespace sarfuse::sf;

namespace {

using testing::light_arch;

const testing::TrainedGapfill& trained() { return testing::trained_gapfill(); }

NormStats unit_stats() {
  NormStats s;
  s.mean.assign(kChannelCount, 0.0);
  s.sd.assign(kChannelCount, 1.0);
  return s;
}

PixelSeries flat_pixel(double ndvi, int T = 29) { return testing::pixel(std::vector<double>(T, ndvi)); }

}  // namespace

TEST_SUITE("sfmodel") {
  TEST_CASE("input encoding") {
    const SfArchitecture arch;
    const auto px = flat_pixel(0.5);
    const auto e = encode_inputs(px, unit_stats(), arch);
    CHECK(e.presence == std::vector<double>(29, 1.0));
    CHECK(e.ndvi == std::vector<double>(29, 0.5));
    CHECK(e.sar.size() == 29 * 8);

    auto hidden = px;
    for (auto& v : hidden.ndvi) v.reset();
    const auto h = encode_inputs(hidden, unit_stats(), arch);
    CHECK(h.presence == std::vector<double>(29, 0.0));
    CHECK(h.ndvi == std::vector<double>(29, kMaskedNdviSentinel));

    NormStats at_mean = unit_stats();
    for (int c = 0; c < kChannelCount; ++c) at_mean.mean[c] = px.channels[c][0];
    for (double z : encode_inputs(px, at_mean, arch).sar) CHECK(z == 0.0);
    CHECK_THROWS_AS(encode_inputs(flat_pixel(0.5, 10), unit_stats(), arch), ValidationError);
    CHECK_THROWS_AS(encode_inputs(px, NormStats{}, arch), ValidationError);
  }

  TEST_CASE("network output shape and masking invariance") {
    SfModel model(SfArchitecture{}, 3);
    model.stats = unit_stats();
    auto px = flat_pixel(0.4);
    for (int t : {2, 3, 9, 20}) px.ndvi[t].reset();
    auto a = encode_inputs(px, model.stats, model.arch());
    auto b = a;
    for (int t : {2, 3, 9, 20}) b.ndvi[t] = 0.123 * t;
    const EncodedSample* pa = &a;
    const EncodedSample* pb = &b;
    const auto ya = predict(model, std::span(&pa, 1)).front();
    const auto yb = predict(model, std::span(&pb, 1)).front();
    CHECK(ya.size() == 29);
    CHECK(ya == yb);

    for (auto& v : px.ndvi) v.reset();
    auto empty = encode_inputs(px, model.stats, model.arch());
    const EncodedSample* pe = &empty;
    const auto out = predict(model, std::span(&pe, 1));
    for (double y : out.front()) {
      CHECK(std::isfinite(y));
      CHECK(std::fabs(y) <= 1.0);
    }
  }

  TEST_CASE("gap-fill sample weights") {
    const SfArchitecture arch;
    TrainConfig tc;
    auto px = flat_pixel(0.5);
    px.ndvi[4].reset();
    std::vector<double> target(29, 0.5);
    std::vector<std::uint8_t> observed(29, 1);
    observed[4] = 0;
    CloudMask mask{std::vector<std::uint8_t>(29, 0)};
    mask.bits[4] = mask.bits[7] = 1;
    const auto s = make_gapfill_sample(px, target, observed, mask, unit_stats(), arch, tc);
    CHECK(s.weight[4] == tc.w_interp);
    CHECK(s.weight[7] == tc.w_alpha);
    CHECK(s.weight[0] == tc.w_beta);
    CHECK(s.input.presence[7] == 0.0);
    CHECK(s.input.ndvi[7] == kMaskedNdviSentinel);
    CHECK(s.input.presence[0] == 1.0);
    CHECK_THROWS_AS(make_gapfill_sample(px, std::vector<double>(3), observed, mask, unit_stats(), arch, tc),
                    ValidationError);
  }

  TEST_CASE("training learns and stops by the patience rule") {
    const auto& t = trained();
    const auto& rep = t.fit.report;
    REQUIRE(rep.stopped_epoch >= 1);
    CHECK(rep.train_loss.size() == static_cast<std::size_t>(rep.stopped_epoch));
    CHECK(rep.train_loss.front() > rep.train_loss.back());
    CHECK(rep.stopped_epoch - rep.best_epoch <= 3);
    CHECK(rep.validation_samples > 0);
    CHECK(t.fit.model.trained);
  }

  TEST_CASE("training is deterministic") {
    const auto& t = trained();
    RunConfig cfg;
    cfg.train.max_epochs = 2;
    const std::vector<std::string> few(t.parcels.begin(), t.parcels.begin() + 30);
    const auto a = evalx::train_gapfill(t.data, few, 4, light_arch(), cfg, 77);
    const auto b = evalx::train_gapfill(t.data, few, 4, light_arch(), cfg, 77);
    CHECK(a.model.params() == b.model.params());
    CHECK(a.report.validation_loss == b.report.validation_loss);
    const auto c = evalx::train_gapfill(t.data, few, 4, light_arch(), cfg, 78);
    CHECK_FALSE(a.model.params() == c.model.params());
  }

  TEST_CASE("gap filling contract") {
    const auto& model = trained().fit.model;
    const auto& px = trained().data.dataset.pixels[5];
    PixelSeries full = px;
    for (int t = 0; t < 29; ++t)
      if (!full.ndvi[t]) full.ndvi[t] = 0.5;
    const auto same = gapfill_sf(model, full);
    for (int t = 0; t < 29; ++t) CHECK(same[t] == *full.ndvi[t]);

    PixelSeries none = px;
    for (auto& v : none.ndvi) v.reset();
    const auto filled = gapfill_sf(model, none);
    const auto enc = encode_inputs(none, model.stats, model.arch());
    const EncodedSample* pe = &enc;
    CHECK(filled == predict(model, std::span(&pe, 1)).front());
    for (double v : filled) CHECK(std::fabs(v) <= 1.0);

    SfModel untrained(model.arch(), 1);
    untrained.stats = model.stats;
    CHECK_THROWS_AS(gapfill_sf(untrained, px), RuntimeError);
  }

  TEST_CASE("cloud filter on a constant model") {
    SfArchitecture arch;
    arch.sar_channels = {Channel::CohVv};
    SfModel zero(arch, 1);
    std::fill(zero.params().values().begin(), zero.params().values().end(), 0.0);
    zero.stats = unit_stats();
    zero.trained = true;
    auto px = flat_pixel(0.0);
    CHECK(cloud_filter(zero, px) == std::vector<std::uint8_t>(29, 0));
    px.ndvi[12] = -0.3;
    px.ndvi[13] = -0.1;
    const auto flags = cloud_filter(zero, px, 0.15);
    for (int t = 0; t < 29; ++t) CHECK(flags[t] == (t == 12 ? 1 : 0));
    const auto filled = gapfill_sf(zero, px, GapfillOptions{true, 0.15});
    CHECK(filled[12] == 0.0);
    CHECK(filled[13] == -0.1);
  }

  TEST_CASE("cloud filter flags injected dips but not senescence") {
    const auto& model = trained().fit.model;
    cloudsim::SynthConfig sc;
    sc.n_parcels = 12;
    sc.pixels_per_parcel = 1;
    sc.mow_probabilities = {1.0, 0.0, 0.0};
    sc.noise_sd = 0.0;
    sc.real_gap_rate = 0.0;
    sc.seed = 400;
    const auto clean = cloudsim::synth_dataset(sc);
    int flagged_dips = 0, dips = 0;
    for (const auto& px : clean.dataset.pixels) {
      const auto flags = cloud_filter(model, px, 0.15);
      for (int t = 0; t < 29; ++t) CHECK(flags[t] == 0);
      for (int t : {9, 14, 19}) {
        auto dipped = px;
        dipped.ndvi[t] = *px.ndvi[t] - 0.3;
        flagged_dips += cloud_filter(model, dipped, 0.15)[t];
        ++dips;
      }
    }
    CHECK(flagged_dips == dips);
  }

  TEST_CASE("model file round trip") {
    const auto& model = trained().fit.model;
    std::stringstream buf;
    model.write(buf);
    const SfModel back = SfModel::read(buf);
    CHECK(back.params() == model.params());
    CHECK(back.stats == model.stats);
    CHECK(back.arch() == model.arch());
    CHECK(back.trained);
    const auto& px = trained().data.dataset.pixels[0];
    CHECK(gapfill_sf(back, px) == gapfill_sf(model, px));

    std::stringstream junk("not a model");
    CHECK_THROWS_AS(SfModel::read(junk), ValidationError);
    CHECK_THROWS_AS(SfModel::load("/nonexistent/model.bin"), RuntimeError);
  }
}
