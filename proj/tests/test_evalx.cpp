#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "reference_matching.hpp"
#include "sarfuse/cloudsim.hpp"
#include "sarfuse/config.hpp"
#include "sarfuse/error.hpp"
#include "sarfuse/evalx.hpp"
#include "sarfuse/experiments.hpp"

using namespace sarfuse;
using namespace sarfuse::evalx;
using doctest::Approx;
using testing::kGap;
using testing::brute_force_matching;

TEST_SUITE("evalx") {
  TEST_CASE("mae and selectors") {
    const std::vector<double> pred{0.4, 0.8};
    const auto truth = testing::series({0.5, 0.7});
    CHECK(mae(pred, truth, nullptr, Selector::AllPresent) == Approx(0.1));
    CHECK(mae(std::vector<double>{0.5, 0.7}, truth, nullptr, Selector::AllPresent) == 0.0);

    const CloudMask mask{{0, 1, 1}};
    const auto gappy = testing::series({0.5, 0.7, kGap});
    const std::vector<double> p3{0.9, 0.6, 0.0};
    CHECK(select_steps(gappy, &mask, Selector::MaskedOnly) == std::vector<std::uint8_t>{0, 1, 0});
    CHECK(select_steps(gappy, &mask, Selector::AllPresent) == std::vector<std::uint8_t>{1, 1, 0});
    CHECK(mae(p3, gappy, &mask, Selector::MaskedOnly) == Approx(0.1));
    CHECK(mae(p3, gappy, &mask, Selector::AllPresent) == Approx(0.25));

    CHECK_THROWS_AS(mae(p3, gappy, nullptr, Selector::MaskedOnly), ValidationError);
    CHECK_THROWS_AS(mae(pred, gappy, nullptr, Selector::AllPresent), ValidationError);
    CHECK_THROWS_AS(mae(p3, testing::series({kGap, kGap, kGap}), nullptr, Selector::AllPresent), ValidationError);
    CHECK(selector_from_name(selector_name(Selector::MaskedOnly)) == Selector::MaskedOnly);
    CHECK_THROWS_AS(selector_from_name("some"), ValidationError);
  }

  TEST_CASE("r squared") {
    const auto truth = testing::series({0.2, 0.4, 0.6, 0.8});
    CHECK(r_squared(std::vector<double>{0.2, 0.4, 0.6, 0.8}, truth, nullptr, Selector::AllPresent) == 1.0);
    CHECK(r_squared(std::vector<double>(4, 0.5), truth, nullptr, Selector::AllPresent) == Approx(0.0));
    CHECK(r_squared(std::vector<double>{0.8, 0.6, 0.4, 0.2}, truth, nullptr, Selector::AllPresent) < 0.0);
    CHECK_THROWS_AS(r_squared(std::vector<double>(4, 0.5), testing::series({0.3, 0.3, 0.3, 0.3}), nullptr,
                              Selector::AllPresent),
                    ValidationError);

    ErrorPool pool;
    pool.add(std::vector<double>{0.3, 0.5}, testing::series({0.2, 0.4}), std::vector<std::uint8_t>{1, 1});
    pool.add(0.9, 0.6);
    CHECK(pool.size() == 3);
    CHECK(pool.mae() == Approx((0.1 + 0.1 + 0.3) / 3));
    CHECK_THROWS_AS(ErrorPool{}.mae(), ValidationError);
  }

  TEST_CASE("event matching examples") {
    auto m = match_events(std::vector<int>{160}, std::vector<int>{170});
    CHECK(m.true_positive == 1);
    CHECK(m.matched_pairs == std::vector<std::pair<int, int>>{{160, 170}});
    m = match_events(std::vector<int>{160}, std::vector<int>{180});
    CHECK(m.true_positive == 0);
    CHECK(m.false_positive == 1);
    CHECK(m.false_negative == 1);
    m = match_events(std::vector<int>{160}, std::vector<int>{155, 165});
    CHECK(m.true_positive == 1);
    CHECK(m.false_negative == 1);
    CHECK(m.false_positive == 0);
    CHECK(match_events(std::vector<int>{160}, std::vector<int>{172}, 12).true_positive == 1);
    CHECK(match_events(std::vector<int>{160}, std::vector<int>{173}, 12).true_positive == 0);
    CHECK_THROWS_AS(match_events(std::vector<int>{}, std::vector<int>{}, -1), ValidationError);
  }

  TEST_CASE("matching equals brute force and recall grows with tolerance") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> count(0, 6), day(100, 268);
    for (int rep = 0; rep < 200; ++rep) {
      std::vector<int> p(count(rng)), q(count(rng));
      for (int& d : p) d = day(rng);
      for (int& d : q) d = day(rng);
      double last_recall = -1.0;
      for (int tol = 0; tol <= 30; tol += 3) {
        const auto m = match_events(p, q, tol);
        REQUIRE(m.true_positive == brute_force_matching(p, q, tol));
        CHECK(m.true_positive + m.false_positive == static_cast<int>(p.size()));
        CHECK(m.true_positive + m.false_negative == static_cast<int>(q.size()));
        for (const auto& [a, b] : m.matched_pairs) CHECK(std::abs(a - b) <= tol);
        const double r = prf(m).recall;
        CHECK(r >= last_recall);
        last_recall = r;
      }
    }
  }

  TEST_CASE("precision, recall and f1") {
    MatchResult m;
    m.true_positive = 1;
    m.false_negative = 1;
    auto s = prf(m);
    CHECK(s.recall == 0.5);
    CHECK(s.precision == 1.0);
    CHECK(s.f1 == Approx(2.0 / 3));
    s = prf(MatchResult{});
    CHECK(s.recall == 1.0);
    CHECK(s.precision == 1.0);
    CHECK(s.f1 == 1.0);
    MatchResult fp;
    fp.false_positive = 3;
    CHECK(prf(fp).precision == 0.0);
    CHECK(prf(fp).f1 == 0.0);
  }

  TEST_CASE("coverage bins") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> cov(0.4, 0.1);
    std::vector<double> c(20000);
    for (double& x : c) x = std::clamp(cov(rng), 0.0, 1.0);
    std::vector<MatchResult> per(c.size());
    for (auto& m : per) m.true_positive = 1;
    const auto rep = binned_report(per, c);
    CHECK(rep.mu == Approx(0.4).epsilon(0.01));
    CHECK(rep.sigma == Approx(0.1).epsilon(0.03));
    const std::array<double, 4> expected{0.1587, 0.3413, 0.3413, 0.1587};
    for (int b = 0; b < 4; ++b) CHECK(rep.bins[b].parcels / 20000.0 == Approx(expected[b]).epsilon(0.06));
    CHECK(rep.bins[0].lower == 0.0);
    CHECK(rep.bins[0].upper == rep.mu - rep.sigma);
    CHECK(rep.bins[1].upper == rep.mu);
    CHECK(rep.bins[2].upper == rep.mu + rep.sigma);
    CHECK(rep.bins[3].upper == 1.0);
    CHECK(rep.bins[1].match.true_positive == rep.bins[1].parcels);

    const std::vector<double> same(10, 0.3);
    const auto flat = binned_report(std::span(per.data(), 10), same);
    int occupied = 0;
    for (const auto& b : flat.bins) occupied += b.parcels > 0;
    CHECK(occupied == 1);
    CHECK(flat.sigma == 1e-6);
    CHECK_THROWS_AS(binned_report({}, {}), ValidationError);
  }

  TEST_CASE("parcel split, pixel sampling and masks") {
    cloudsim::SynthConfig sc;
    sc.n_parcels = 40;
    sc.pixels_per_parcel = 6;
    sc.seed = 12;
    auto r = cloudsim::synth_dataset(sc);
    const ExperimentData data{std::move(r.dataset), std::move(r.pools)};
    const auto& ds = data.dataset;

    const auto split = split_parcels(ds, 0.25, 3);
    std::set<std::string> seen(split.train.begin(), split.train.end());
    for (const auto& id : split.test) CHECK(seen.insert(id).second);
    CHECK(seen.size() == 40);
    CHECK(split.test.size() >= 8);
    CHECK(split.test.size() <= 12);
    CHECK(split_parcels(ds, 0.25, 3).test == split.test);

    const auto px = sample_pixels(ds, split.train, 4, 9);
    CHECK(px.size() == 4 * split.train.size());
    const auto all = sample_pixels(ds, split.train, 50, 9);
    CHECK(all.size() == 6 * split.train.size());

    const auto members = ds.parcel_members();
    const auto masks = parcel_masks(data, split.test, 5);
    CHECK(masks.size() == split.test.size());
    for (const auto& [id, m] : masks) {
      const auto& region = ds.pixels[members.at(id).front()].region_id;
      const auto& pool = pool_for_region(data.pools, region).masks;
      CHECK(std::find(pool.begin(), pool.end(), m) != pool.end());
    }
    CHECK(parcel_masks(data, split.test, 5) == masks);
  }

  TEST_CASE("hidden event experiment") {
    cloudsim::SynthConfig sc;
    sc.n_parcels = 40;
    sc.pixels_per_parcel = 2;
    sc.seed = 31;
    const auto ds = cloudsim::synth_dataset(sc).dataset;
    RunConfig cfg;
    detect::DetectContext ctx;
    const auto res = hidden_event_experiment(ds, ds.parcel_ids(), {detect::FillMethod::None, detect::FillMethod::Linear},
                                             detect::Algorithm::Mda1, ctx, cfg, 4);
    REQUIRE(!res.log.empty());
    for (const auto& rec : res.log) {
      CHECK(rec.hidden_steps >= cfg.experiment.hidden_min_steps + 1);
      CHECK(rec.hidden_steps <= cfg.experiment.hidden_max_steps + 1);
      CHECK(ds.grid.doy(rec.first_hidden_step) < rec.event_doy);
      CHECK(ds.grid.doy(rec.first_hidden_step + 1) >= rec.event_doy);
    }
    for (const auto& f : res.fills) {
      REQUIRE(f.by_tolerance.size() == static_cast<std::size_t>(cfg.experiment.tolerance_days) + 1);
      for (std::size_t t = 1; t < f.by_tolerance.size(); ++t)
        CHECK(f.by_tolerance[t].true_positive >= f.by_tolerance[t - 1].true_positive);
    }
    CHECK(res.fill(detect::FillMethod::None).scores.recall <= 0.1);
    CHECK_THROWS_AS(res.fill(detect::FillMethod::Sf), ValidationError);

    cloudsim::SynthConfig unmown = sc;
    unmown.mow_probabilities = {1.0, 0.0, 0.0};
    const auto none = cloudsim::synth_dataset(unmown).dataset;
    CHECK_THROWS_AS(hidden_event_experiment(none, none.parcel_ids(), {detect::FillMethod::None},
                                            detect::Algorithm::Mda1, ctx, cfg, 4),
                    ValidationError);
  }
}
