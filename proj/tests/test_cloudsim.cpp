#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "sarfuse/cloudsim.hpp"
#include "sarfuse/error.hpp"
#include "sarfuse/preprocess.hpp"

using namespace sarfuse;
using namespace sarfuse::cloudsim;
using doctest::Approx;

TEST_SUITE("cloudsim") {
  TEST_CASE("bootstrap from a singleton pool") {
    MaskPool pool{"R1", {CloudMask{{0, 1, 0, 1}}}};
    Rng rng(1);
    for (int i = 0; i < 20; ++i) CHECK(bootstrap_mask(pool, rng) == pool.masks[0]);
    CHECK_THROWS_AS(bootstrap_mask(MaskPool{}, rng), ValidationError);
  }

  TEST_CASE("bootstrap mean coverage matches the pool") {
    MaskPoolConfig cfg;
    cfg.seed = 99;
    const auto pool = generate_mask_pool("R1", TemporalGrid{}, cfg);
    CHECK(pool.masks.size() == 200);
    CHECK(pool.mean_coverage() == Approx(0.45).epsilon(0.01 / 0.45));
    Rng rng(4);
    double sum = 0;
    for (int i = 0; i < 10000; ++i) sum += bootstrap_mask(pool, rng).coverage();
    CHECK(std::fabs(sum / 10000 - pool.mean_coverage()) < 0.01);

    Rng a(8), b(8);
    for (int i = 0; i < 50; ++i) CHECK(bootstrap_mask(pool, a) == bootstrap_mask(pool, b));
  }

  TEST_CASE("mask pools are cloudier at the season edges") {
    MaskPoolConfig cfg;
    cfg.size = 2000;
    cfg.edge_amplitude = 0.6;
    const TemporalGrid g;
    const auto pool = generate_mask_pool("R1", g, cfg);
    auto step_rate = [&](int lo, int hi) {
      double s = 0;
      for (const auto& m : pool.masks)
        for (int t = lo; t < hi; ++t) s += m.bits[t];
      return s / (pool.masks.size() * (hi - lo));
    };
    CHECK(step_rate(0, 5) > step_rate(12, 17) + 0.1);
    CHECK(step_rate(24, 29) > step_rate(12, 17) + 0.1);
    CHECK_NOTHROW(pool.validate(29));
    CHECK_THROWS_AS(pool.validate(30), ValidationError);
  }

  TEST_CASE("apply mask") {
    const auto px = testing::pixel(std::vector<double>(10, 0.5));
    CHECK(apply_mask(px, CloudMask{std::vector<std::uint8_t>(10, 0)}).ndvi == px.ndvi);
    const auto all = apply_mask(px, CloudMask{std::vector<std::uint8_t>(10, 1)});
    for (const auto& v : all.ndvi) CHECK_FALSE(v.has_value());
    CHECK(all.channels == px.channels);
    CloudMask seven{std::vector<std::uint8_t>(10, 0)};
    seven.bits[7] = 1;
    const auto one = apply_mask(px, seven);
    for (int t = 0; t < 10; ++t) CHECK(one.ndvi[t].has_value() == (t != 7));
    CHECK(preprocess::coverage(all.ndvi) == Approx(1.0));
    CHECK_THROWS_AS(apply_mask(px, CloudMask{{1, 0}}), ValidationError);
  }

  TEST_CASE("mowing deficit halves at the recovery time") {
    const MowingEvent e{160, 0.4};
    CHECK(mowing_deficit(e, 159, 10) == 0.0);
    CHECK(mowing_deficit(e, 160, 10) == Approx(0.4));
    CHECK(mowing_deficit(e, 170, 10) == Approx(0.2));
    CHECK(mowing_deficit(e, 180, 10) == Approx(0.1));
  }

  TEST_CASE("forced single mowing") {
    SynthConfig cfg;
    cfg.n_parcels = 40;
    cfg.pixels_per_parcel = 2;
    cfg.mow_probabilities = {0.0, 1.0, 0.0};
    const auto r = synth_dataset(cfg);
    CHECK_NOTHROW(r.dataset.validate());
    REQUIRE(r.dataset.labels.size() == 40);
    for (const auto& l : r.dataset.labels) {
      REQUIRE(l.event_doys.size() == 1);
      CHECK(l.event_doys[0] >= cfg.event_first_doy);
      CHECK(l.event_doys[0] <= cfg.event_last_doy);
    }
    for (const auto& t : r.truth)
      for (const auto& e : t.events) CHECK(e.depth >= 0.1);
  }

  TEST_CASE("noise-free unmown parcels follow the phenology curve") {
    SynthConfig cfg;
    cfg.n_parcels = 12;
    cfg.pixels_per_parcel = 3;
    cfg.mow_probabilities = {1.0, 0.0, 0.0};
    cfg.noise_sd = 0.0;
    cfg.pixel_jitter = 0.0;
    const auto r = synth_dataset(cfg);
    const auto& g = r.dataset.grid;
    for (std::size_t p = 0; p < r.truth.size(); ++p) {
      for (int k = 0; k < 3; ++k) {
        const auto& px = r.dataset.pixels[p * 3 + k];
        for (int t = 0; t < g.length; ++t) {
          if (px.ndvi[t]) CHECK(*px.ndvi[t] == Approx(std::clamp(r.truth[p].phenology(g.doy(t)), 0.02, 0.98)));
        }
      }
    }
  }

  TEST_CASE("clean series survive the outlier pass") {
    SynthConfig cfg;
    cfg.n_parcels = 60;
    cfg.pixels_per_parcel = 2;
    cfg.noise_sd = 0.0;
    cfg.cirrus_rate = 0.0;
    const auto r = synth_dataset(cfg);
    for (const auto& t : r.truth) CHECK(t.cirrus_steps.empty());
    for (const auto& px : r.dataset.pixels) {
      CHECK(preprocess::remove_outliers(px.ndvi, r.dataset.grid) == px.ndvi);
    }
  }

  TEST_CASE("synthesis is a pure function of the config") {
    SynthConfig cfg;
    cfg.n_parcels = 20;
    cfg.cirrus_rate = 0.05;
    const auto a = synth_dataset(cfg);
    const auto b = synth_dataset(cfg);
    REQUIRE(a.dataset.pixels.size() == b.dataset.pixels.size());
    for (std::size_t i = 0; i < a.dataset.pixels.size(); ++i) {
      CHECK(a.dataset.pixels[i].ndvi == b.dataset.pixels[i].ndvi);
      CHECK(a.dataset.pixels[i].channels == b.dataset.pixels[i].channels);
    }
    for (std::size_t r = 0; r < a.pools.size(); ++r) CHECK(a.pools[r].masks == b.pools[r].masks);
    cfg.seed += 1;
    CHECK(synth_dataset(cfg).dataset.pixels[0].channels != a.dataset.pixels[0].channels);
  }

  TEST_CASE("synthetic ranges and mask pools") {
    SynthConfig cfg;
    cfg.n_parcels = 30;
    cfg.cirrus_rate = 0.1;
    const auto r = synth_dataset(cfg);
    CHECK_NOTHROW(r.dataset.validate());
    REQUIRE(r.pools.size() == 4);
    for (const auto& pool : r.pools) CHECK(std::fabs(pool.mean_coverage() - 0.45) < 0.01);
    int cirrus = 0;
    for (const auto& t : r.truth) cirrus += static_cast<int>(t.cirrus_steps.size());
    CHECK(cirrus > 0);
    SynthConfig bad = cfg;
    bad.mow_probabilities = {0.5, 0.6, 0.0};
    CHECK_THROWS_AS(synth_dataset(bad), ValidationError);
    bad = cfg;
    bad.drop_depth_min = 0.05;
    CHECK_THROWS_AS(synth_dataset(bad), ValidationError);
  }
}
