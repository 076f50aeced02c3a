#include "sarfuse/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "sarfuse/error.hpp"
#include "sarfuse/interp.hpp"
#include "sarfuse/preprocess.hpp"
#include "sarfuse/seed.hpp"

namespace sarfuse::evalx {

using json = nlohmann::json;

const cloudsim::MaskPool& pool_for_region(const std::vector<cloudsim::MaskPool>& pools, const std::string& region) {
  for (const auto& p : pools) {
    if (p.region_id == region) return p;
  }
  throw ValidationError("no mask pool for region '" + region + "'");
}

namespace {

std::vector<std::string> regions_in_order(const Dataset& ds) {
  std::vector<std::string> regions;
  for (const auto& p : ds.pixels) {
    if (std::find(regions.begin(), regions.end(), p.region_id) == regions.end()) regions.push_back(p.region_id);
  }
  return regions;
}

std::unordered_map<std::string, std::string> parcel_regions(const Dataset& ds) {
  std::unordered_map<std::string, std::string> m;
  for (const auto& p : ds.pixels) m.emplace(p.parcel_id, p.region_id);
  return m;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  return m;
}

PixelSeries cleaned(const PixelSeries& p, const TemporalGrid& grid, const RunConfig& cfg) {
  PixelSeries out = p;
  out.ndvi = preprocess::remove_outliers(p.ndvi, grid, cfg.outliers);
  return out;
}

std::vector<int> event_doys_of(const Dataset& ds, const std::string& parcel) {
  const ParcelLabel* l = ds.find_label(parcel);
  if (l == nullptr) throw ValidationError("parcel '" + parcel + "' has no label");
  return l->event_doys;
}

}  // namespace

ParcelSplit split_parcels(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ValidationError("test_fraction must lie in (0, 1)");
  const auto regions = parcel_regions(dataset);
  std::map<std::string, std::vector<std::string>> by_region;
  for (const auto& id : dataset.parcel_ids()) by_region[regions.at(id)].push_back(id);
  cloudsim::Rng rng(seed);
  std::unordered_map<std::string, int> in_test;
  for (auto& [region, ids] : by_region) {
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(ids.size())));
    for (std::size_t i = 0; i < ids.size(); ++i) in_test[ids[i]] = i < n_test ? 1 : 0;
  }
  ParcelSplit split;
  for (const auto& id : dataset.parcel_ids()) (in_test[id] ? split.test : split.train).push_back(id);
  return split;
}

std::vector<const PixelSeries*> sample_pixels(const Dataset& dataset, const std::vector<std::string>& parcels,
                                              int per_parcel, std::uint64_t seed) {
  const auto members = dataset.parcel_members();
  std::vector<const PixelSeries*> out;
  for (std::size_t k = 0; k < parcels.size(); ++k) {
    const auto it = members.find(parcels[k]);
    if (it == members.end()) throw ValidationError("unknown parcel '" + parcels[k] + "'");
    std::vector<std::size_t> idx = it->second;
    cloudsim::Rng rng(derive_seed(seed, parcels[k]));
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(idx.size(), static_cast<std::size_t>(per_parcel)));
    std::sort(idx.begin(), idx.end());
    for (std::size_t i : idx) out.push_back(&dataset.pixels[i]);
  }
  return out;
}

std::unordered_map<std::string, CloudMask> parcel_masks(const ExperimentData& data,
                                                        const std::vector<std::string>& parcels, std::uint64_t seed) {
  const auto regions = parcel_regions(data.dataset);
  std::unordered_map<std::string, CloudMask> masks;
  for (const auto& id : parcels) {
    cloudsim::Rng rng(derive_seed(seed, id));
    masks.emplace(id, cloudsim::bootstrap_mask(pool_for_region(data.pools, regions.at(id)), rng));
  }
  return masks;
}

std::vector<std::vector<double>> sf_fill_batch(const sf::SfModel& model, std::span<const PixelSeries* const> pixels) {
  if (!model.trained) throw RuntimeError("model has not been trained");
  std::vector<sf::EncodedSample> enc(pixels.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < pixels.size(); ++i) enc[i] = sf::encode_inputs(*pixels[i], model.stats, model.arch());
  std::vector<const sf::EncodedSample*> ptrs;
  for (const auto& e : enc) ptrs.push_back(&e);
  auto out = sf::predict(model, ptrs, sf::Execution::Parallel);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    for (std::size_t t = 0; t < out[i].size(); ++t) {
      if (pixels[i]->ndvi[t]) out[i][t] = *pixels[i]->ndvi[t];
    }
  }
  return out;
}

GapfillTraining train_gapfill(const ExperimentData& data, const std::vector<std::string>& parcels, int per_parcel,
                              const sf::SfArchitecture& arch, const RunConfig& cfg, std::uint64_t seed,
                              sf::Execution exec) {
  const auto& grid = data.dataset.grid;
  const auto pixels = sample_pixels(data.dataset, parcels, per_parcel, derive_seed(seed, "train-pixels"));
  const auto masks = parcel_masks(data, parcels, derive_seed(seed, "train-masks"));
  GapfillTraining result{sf::SfModel(arch, derive_seed(seed, "init")), {}, 0, 0, 0.0};
  result.model.stats = sf::NormStats::compute(pixels);

  std::vector<std::optional<sf::TrainingSample>> slots(pixels.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const PixelSeries px = cleaned(*pixels[i], grid, cfg);
    if (!preprocess::passes_density(px.ndvi, grid, cfg.density) || px.present_count() < 5) continue;
    const auto target = preprocess::build_target(px.ndvi, grid);
    slots[i] = sf::make_gapfill_sample(px, target.values, target.observed, masks.at(px.parcel_id), result.model.stats,
                                       arch, cfg.train);
  }
  std::vector<sf::TrainingSample> samples;
  double coverage = 0.0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i]) {
      ++result.density_rejected;
      continue;
    }
    coverage += masks.at(pixels[i]->parcel_id).coverage();
    samples.push_back(std::move(*slots[i]));
  }
  if (samples.empty()) throw ValidationError("no training pixel passed the density filter");
  result.samples = samples.size();
  result.mean_mask_coverage = coverage / static_cast<double>(samples.size());
  sf::TrainConfig tc = cfg.train;
  tc.seed = derive_seed(seed, "train");
  result.report = sf::train(result.model, samples, tc, exec);
  return result;
}

const MethodScore& GapfillComparison::score(const std::string& method) const {
  for (const auto& m : methods) {
    if (m.method == method) return m;
  }
  throw ValidationError("no score for method '" + method + "'");
}

GapfillComparison compare_gapfill(const sf::SfModel& model, const ExperimentData& data,
                                  const std::vector<std::string>& parcels, const RunConfig& cfg, std::uint64_t seed,
                                  bool interpolators) {
  const auto& grid = data.dataset.grid;
  const auto pixels =
      sample_pixels(data.dataset, parcels, cfg.experiment.eval_pixels_per_parcel, derive_seed(seed, "eval-pixels"));
  const auto masks = parcel_masks(data, parcels, derive_seed(seed, "eval-masks"));

  GapfillComparison out;
  std::vector<PixelSeries> truth, masked;
  std::vector<const CloudMask*> used_masks;
  for (const auto* p : pixels) {
    PixelSeries clean = cleaned(*p, grid, cfg);
    const CloudMask& m = masks.at(p->parcel_id);
    PixelSeries hidden = cloudsim::apply_mask(clean, m);
    const auto sel = select_steps(clean.ndvi, &m, Selector::MaskedOnly);
    const bool any = std::find(sel.begin(), sel.end(), 1) != sel.end();
    if (!any || hidden.present_count() < interp::min_knots(interp::Method::Akima)) {
      ++out.skipped_pixels;
      continue;
    }
    truth.push_back(std::move(clean));
    masked.push_back(std::move(hidden));
    used_masks.push_back(&m);
  }
  if (truth.empty()) throw ValidationError("no evaluable pixels");
  std::vector<const PixelSeries*> ptrs;
  for (const auto& m : masked) ptrs.push_back(&m);
  const auto sf_pred = sf_fill_batch(model, ptrs);

  std::vector<std::string> names{"sf"};
  if (interpolators) names.insert(names.end(), {"linear", "akima", "quadratic"});
  std::vector<ErrorPool> pools(names.size());
  std::vector<std::vector<double>> pixel_mae(names.size());
  double coverage = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto sel = select_steps(truth[i].ndvi, used_masks[i], Selector::MaskedOnly);
    out.masked_steps += static_cast<std::size_t>(std::count(sel.begin(), sel.end(), 1));
    coverage += used_masks[i]->coverage();
    for (std::size_t k = 0; k < names.size(); ++k) {
      std::vector<double> pred;
      if (names[k] == "sf") {
        pred = sf_pred[i];
      } else {
        pred = interp::fill(masked[i].ndvi, grid, interp::method_from_name(names[k]));
      }
      ErrorPool single;
      single.add(pred, truth[i].ndvi, sel);
      pixel_mae[k].push_back(single.mae());
      pools[k].add(pred, truth[i].ndvi, sel);
    }
  }
  out.pixels = truth.size();
  out.mean_mask_coverage = coverage / static_cast<double>(truth.size());
  for (std::size_t k = 0; k < names.size(); ++k) {
    out.methods.push_back({names[k], pools[k].mae(), pools[k].r_squared(), median(pixel_mae[k])});
  }
  return out;
}

std::vector<FeatureSubset> feature_subsets() {
  return {{"ndvi+coherence+sigma0", true, true, true}, {"ndvi+sigma0", true, false, true},
          {"ndvi+coherence", true, true, false},       {"ndvi", true, false, false},
          {"coherence+sigma0", false, true, true},     {"sigma0", false, false, true},
          {"coherence", false, true, false}};
}

sf::SfArchitecture subset_architecture(const FeatureSubset& s, int steps) {
  if (!s.ndvi && !s.coherence && !s.sigma0) throw ValidationError("empty feature subset");
  sf::SfArchitecture a;
  a.steps = steps;
  a.use_ndvi = s.ndvi;
  a.sar_channels.clear();
  if (s.sigma0) {
    a.sar_channels.insert(a.sar_channels.end(), {Channel::Sigma0VvDb, Channel::Sigma0VhDb, Channel::Sigma0Ratio,
                                                 Channel::Sigma0CrossRatioDb, Channel::Rvi});
  }
  if (s.coherence) {
    a.sar_channels.insert(a.sar_channels.end(), {Channel::CohVv, Channel::CohVh, Channel::MixedCoherence});
  }
  return a;
}

std::vector<AblationRow> ablation_experiment(const ExperimentData& data, const ParcelSplit& split,
                                             const RunConfig& cfg, std::uint64_t seed) {
  std::vector<AblationRow> rows;
  for (const auto& subset : feature_subsets()) {
    const auto arch = subset_architecture(subset, data.dataset.grid.length);
    // Identical seed for every subset: same pixels, masks and shuffles.
    auto trained = train_gapfill(data, split.train, cfg.experiment.ablation_train_pixels_per_parcel, arch, cfg, seed);
    const auto cmp = compare_gapfill(trained.model, data, split.test, cfg, seed, false);
    rows.push_back({subset, cmp.score("sf").mae, cmp.score("sf").r2, trained.report.stopped_epoch,
                    trained.report.validation_loss});
  }
  return rows;
}

const HiddenFillResult& HiddenEventResult::fill(detect::FillMethod f) const {
  for (const auto& r : fills) {
    if (r.fill == f) return r;
  }
  throw ValidationError("fill method not part of this experiment");
}

HiddenEventResult hidden_event_experiment(const Dataset& dataset, const std::vector<std::string>& parcels,
                                          const std::vector<detect::FillMethod>& fills, detect::Algorithm algorithm,
                                          const detect::DetectContext& ctx, const RunConfig& cfg, std::uint64_t seed) {
  const auto& grid = dataset.grid;
  const auto& ex = cfg.experiment;
  HiddenEventResult result;
  std::vector<PixelSeries> series;
  for (const auto& id : parcels) {
    const auto events = event_doys_of(dataset, id);
    if (events.size() != 1) continue;
    const int pre = (events[0] - 1 - grid.start_doy) / grid.step_days;
    if (events[0] - 1 < grid.start_doy || pre + 1 >= grid.length) continue;
    cloudsim::Rng rng(derive_seed(seed, id));
    std::uniform_int_distribution<int> len(ex.hidden_min_steps, ex.hidden_max_steps);
    const int after = len(rng);
    const int last = std::min(grid.length - 1, pre + after);
    PixelSeries s = parcel_series(dataset, id);
    for (int t = pre; t <= last; ++t) s.ndvi[static_cast<std::size_t>(t)].reset();
    if (s.present_count() < interp::min_knots(interp::Method::Akima)) continue;
    result.log.push_back({id, events[0], pre, last - pre + 1});
    series.push_back(std::move(s));
  }
  if (series.empty()) throw ValidationError("hidden-event experiment: no eligible single-event parcels");

  for (const auto fill : fills) {
    std::vector<detect::EventSet> detected(series.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < series.size(); ++i) {
      detected[i] = detect::detect_series(series[i], grid, algorithm, fill, ctx);
    }
    HiddenFillResult r;
    r.fill = fill;
    r.by_tolerance.resize(static_cast<std::size_t>(ex.tolerance_days) + 1);
    for (std::size_t i = 0; i < series.size(); ++i) {
      const std::vector<int> truth{result.log[i].event_doy};
      for (int tol = 0; tol <= ex.tolerance_days; ++tol) {
        r.by_tolerance[static_cast<std::size_t>(tol)] += match_events(detected[i].doys, truth, tol);
      }
    }
    r.at_tolerance = r.by_tolerance.back();
    r.scores = prf(r.at_tolerance);
    result.fills.push_back(std::move(r));
  }
  return result;
}

CirrusResult cirrus_experiment(const Dataset& dataset, const std::vector<std::string>& parcels,
                               const sf::SfModel& gapfill, const RunConfig& cfg) {
  const auto& grid = dataset.grid;
  detect::DetectContext ctx;
  ctx.mda1 = cfg.mda1;
  ctx.gapfill_model = &gapfill;
  ctx.gapfill.cloud_filter = true;
  ctx.gapfill.threshold = cfg.cloud_filter_threshold;
  std::vector<detect::EventSet> raw(parcels.size()), filtered(parcels.size());
  std::vector<PixelSeries> series(parcels.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < parcels.size(); ++i) {
    series[i] = parcel_series(dataset, parcels[i]);
    raw[i] = detect::mda1(series[i].ndvi, grid, cfg.mda1);
    filtered[i] = detect::detect_series(series[i], grid, detect::Algorithm::Mda1, detect::FillMethod::Sf, ctx);
  }
  CirrusResult r;
  r.parcels = static_cast<int>(parcels.size());
  for (std::size_t i = 0; i < parcels.size(); ++i) {
    const auto truth = event_doys_of(dataset, parcels[i]);
    r.raw += match_events(raw[i].doys, truth, cfg.experiment.tolerance_days);
    r.filtered += match_events(filtered[i].doys, truth, cfg.experiment.tolerance_days);
  }
  r.raw_scores = prf(r.raw);
  r.filtered_scores = prf(r.filtered);
  return r;
}

std::vector<std::vector<std::string>> stratified_folds(const Dataset& dataset, const std::vector<std::string>& parcels,
                                                       int folds) {
  if (folds < 2) throw ValidationError("need at least two folds");
  if (parcels.size() < static_cast<std::size_t>(folds)) throw ValidationError("fewer parcels than folds");
  std::vector<std::pair<int, std::string>> keyed;
  for (const auto& id : parcels) {
    const auto events = event_doys_of(dataset, id);
    keyed.emplace_back(events.empty() ? std::numeric_limits<int>::max() : events.front(), id);
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::vector<std::string>> out(static_cast<std::size_t>(folds));
  for (std::size_t i = 0; i < keyed.size(); ++i) out[i % out.size()].push_back(keyed[i].second);
  return out;
}

DetectorCvResult detector_cv(const ExperimentData& data, const std::vector<std::string>& parcels,
                             const sf::SfModel& gapfill, const RunConfig& cfg, std::uint64_t seed) {
  const auto& ds = data.dataset;
  const auto& grid = ds.grid;
  const auto masks = parcel_masks(data, parcels, derive_seed(seed, "cv-masks"));
  detect::DetectContext ctx;
  ctx.mda1 = cfg.mda1;
  ctx.mda2 = cfg.mda2;
  ctx.decode_threshold = cfg.decode_threshold;
  ctx.gapfill_model = &gapfill;
  ctx.gapfill.cloud_filter = true;
  ctx.gapfill.threshold = cfg.cloud_filter_threshold;

  // Parcel evaluation series: masked, aggregated, SF-filled.
  std::unordered_map<std::string, std::size_t> parcel_index;
  std::vector<PixelSeries> parcel_filled(parcels.size());
  std::vector<double> parcel_coverage(parcels.size());
  for (std::size_t i = 0; i < parcels.size(); ++i) parcel_index[parcels[i]] = i;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < parcels.size(); ++i) {
    const CloudMask& m = masks.at(parcels[i]);
    PixelSeries s = cloudsim::apply_mask(parcel_series(ds, parcels[i]), m);
    parcel_coverage[i] = m.coverage();
    parcel_filled[i] = detect::fill_series(s, grid, detect::FillMethod::Sf, ctx);
  }

  // Pixel training series: masked with the parcel mask, SF-filled.
  const auto pixels =
      sample_pixels(ds, parcels, cfg.experiment.detector_train_pixels_per_parcel, derive_seed(seed, "cv-pixels"));
  std::vector<PixelSeries> pixel_filled(pixels.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const PixelSeries s = cloudsim::apply_mask(*pixels[i], masks.at(pixels[i]->parcel_id));
    pixel_filled[i] = detect::fill_series(s, grid, detect::FillMethod::Sf, ctx);
  }

  DetectorCvResult result;
  std::vector<MatchResult> dnn_per_parcel(parcels.size()), mda2_per_parcel(parcels.size());
  const auto folds = stratified_folds(ds, parcels, cfg.experiment.folds);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    FoldResult fold;
    fold.parcels = folds[f];
    std::unordered_map<std::string, int> in_fold;
    double doy_sum = 0.0;
    int doy_n = 0;
    for (const auto& id : folds[f]) {
      in_fold[id] = 1;
      for (int d : event_doys_of(ds, id)) {
        doy_sum += d;
        ++doy_n;
      }
    }
    fold.mean_event_doy = doy_n > 0 ? doy_sum / doy_n : 0.0;

    std::vector<const PixelSeries*> train_px;
    std::vector<std::vector<double>> train_labels;
    double positives = 0.0, negatives = 0.0;
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      if (in_fold.count(pixels[i]->parcel_id)) continue;
      train_px.push_back(&pixel_filled[i]);
      const ParcelLabel* label = ds.find_label(pixels[i]->parcel_id);
      train_labels.push_back(detect::detector_labels(*label, grid));
      for (double y : train_labels.back()) (y > 0.5 ? positives : negatives) += 1.0;
    }
    if (positives == 0.0) throw ValidationError("detector fold has no positive steps to learn from");
    fold.pos_weight = negatives / positives;

    sf::SfModel detector(detect::detector_architecture(grid.length), derive_seed(seed, "detector-init", f));
    detector.stats = sf::NormStats::compute(train_px);
    std::vector<sf::TrainingSample> samples(train_px.size());
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < train_px.size(); ++i) {
      samples[i] = detect::make_detection_sample(*train_px[i], train_labels[i], detector.stats, detector.arch(),
                                                 fold.pos_weight);
    }
    fold.train_samples = samples.size();
    sf::TrainConfig tc = cfg.detector_train;
    tc.seed = derive_seed(seed, "detector-train", f);
    sf::train(detector, samples, tc);

    detect::DetectContext fold_ctx = ctx;
    fold_ctx.detector = &detector;
    for (const auto& id : folds[f]) {
      const std::size_t i = parcel_index.at(id);
      const auto truth = event_doys_of(ds, id);
      const int tol = cfg.experiment.tolerance_days;
      const auto dnn = detect::detect_series(parcel_filled[i], grid, detect::Algorithm::Dnn, detect::FillMethod::None,
                                             fold_ctx);
      const auto m2 = detect::detect_series(parcel_filled[i], grid, detect::Algorithm::Mda2, detect::FillMethod::None,
                                            fold_ctx);
      const auto m1 = detect::detect_series(parcel_filled[i], grid, detect::Algorithm::Mda1, detect::FillMethod::None,
                                            fold_ctx);
      dnn_per_parcel[i] = match_events(dnn.doys, truth, tol);
      mda2_per_parcel[i] = match_events(m2.doys, truth, tol);
      fold.dnn += dnn_per_parcel[i];
      fold.mda2 += mda2_per_parcel[i];
      fold.mda1 += match_events(m1.doys, truth, tol);
    }
    result.dnn += fold.dnn;
    result.mda2 += fold.mda2;
    result.mda1 += fold.mda1;
    result.folds.push_back(std::move(fold));
  }
  result.dnn_bins = binned_report(dnn_per_parcel, parcel_coverage);
  result.mda2_bins = binned_report(mda2_per_parcel, parcel_coverage);
  return result;
}

GeneralizationResult generalization_experiment(const ExperimentData& data, const RunConfig& cfg, std::uint64_t seed) {
  const auto regions = regions_in_order(data.dataset);
  if (regions.size() < 2) throw ValidationError("generalization needs at least two regions");
  int h = cfg.experiment.generalization_holdout_region;
  if (h < 0) h = static_cast<int>(regions.size()) - 1;
  if (h >= static_cast<int>(regions.size())) throw ValidationError("holdout region index out of range");
  GeneralizationResult result;
  result.holdout_region = regions[static_cast<std::size_t>(h)];
  std::vector<std::string> pool_regions;
  for (const auto& r : regions) {
    if (r != result.holdout_region) pool_regions.push_back(r);
  }
  const auto owner = parcel_regions(data.dataset);
  std::vector<std::string> holdout;
  for (const auto& id : data.dataset.parcel_ids()) {
    if (owner.at(id) == result.holdout_region) holdout.push_back(id);
  }
  const std::size_t n = pool_regions.size();
  if (n > 16) throw ValidationError("too many regions for exhaustive subsets");
  for (std::uint32_t bits = 1; bits < (1u << n); ++bits) {
    GeneralizationRow row;
    for (std::size_t r = 0; r < n; ++r) {
      if (bits & (1u << r)) row.regions.push_back(pool_regions[r]);
    }
    std::vector<std::string> train;
    for (const auto& id : data.dataset.parcel_ids()) {
      if (std::find(row.regions.begin(), row.regions.end(), owner.at(id)) != row.regions.end()) train.push_back(id);
    }
    auto trained = train_gapfill(data, train, cfg.experiment.ablation_train_pixels_per_parcel, sf::SfArchitecture{},
                                 cfg, seed);
    row.pixels = trained.samples;
    row.mae = compare_gapfill(trained.model, data, holdout, cfg, seed, false).score("sf").mae;
    result.rows.push_back(std::move(row));
  }
  return result;
}

json to_json(const MatchResult& m) {
  return {{"tp", m.true_positive}, {"fp", m.false_positive}, {"fn", m.false_negative}};
}

json to_json(const Prf& p) { return {{"recall", p.recall}, {"precision", p.precision}, {"f1", p.f1}}; }

json to_json(const BinnedReport& b) {
  json bins = json::array();
  for (const auto& bin : b.bins) {
    bins.push_back({{"lower", bin.lower},
                    {"upper", bin.upper},
                    {"parcels", bin.parcels},
                    {"match", to_json(bin.match)},
                    {"scores", to_json(bin.scores)}});
  }
  return {{"mu", b.mu}, {"sigma", b.sigma}, {"bins", bins}};
}

json to_json(const GapfillComparison& g) {
  json methods = json::object();
  for (const auto& m : g.methods) {
    methods[m.method] = {{"mae", m.mae}, {"r2", m.r2}, {"median_pixel_mae", m.median_pixel_mae}};
  }
  return {{"methods", methods},
          {"pixels", g.pixels},
          {"masked_steps", g.masked_steps},
          {"skipped_pixels", g.skipped_pixels},
          {"mean_mask_coverage", g.mean_mask_coverage}};
}

json to_json(const std::vector<AblationRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) out.push_back({{"subset", r.subset.name},
                   {"mae", r.mae},
                   {"r2", r.r2},
                   {"epochs", r.epochs},
                   {"validation_loss", r.validation_loss}});
  return out;
}

json to_json(const HiddenEventResult& h) {
  json fills = json::object();
  for (const auto& f : h.fills) {
    json curve = json::array();
    for (std::size_t tol = 0; tol < f.by_tolerance.size(); ++tol) {
      curve.push_back({{"tolerance_days", tol}, {"recall", prf(f.by_tolerance[tol]).recall}});
    }
    fills[std::string(detect::fill_name(f.fill))] = {
        {"match", to_json(f.at_tolerance)}, {"scores", to_json(f.scores)}, {"recall_curve", curve}};
  }
  json log = json::array();
  for (const auto& r : h.log) {
    log.push_back({{"parcel_id", r.parcel_id},
                   {"event_doy", r.event_doy},
                   {"first_hidden_step", r.first_hidden_step},
                   {"hidden_steps", r.hidden_steps}});
  }
  return {{"fills", fills}, {"parcels", h.log.size()}, {"log", log}};
}

json to_json(const CirrusResult& c) {
  return {{"parcels", c.parcels},
          {"raw", {{"match", to_json(c.raw)}, {"scores", to_json(c.raw_scores)}}},
          {"sf_cloud_filter", {{"match", to_json(c.filtered)}, {"scores", to_json(c.filtered_scores)}}}};
}

json to_json(const DetectorCvResult& d) {
  json folds = json::array();
  for (const auto& f : d.folds) {
    folds.push_back({{"parcels", f.parcels.size()},
                     {"mean_event_doy", f.mean_event_doy},
                     {"train_samples", f.train_samples},
                     {"pos_weight", f.pos_weight},
                     {"dnn", to_json(prf(f.dnn))},
                     {"mda2", to_json(prf(f.mda2))},
                     {"mda1", to_json(prf(f.mda1))}});
  }
  return {{"folds", folds},
          {"dnn", {{"match", to_json(d.dnn)}, {"scores", to_json(prf(d.dnn))}, {"bins", to_json(d.dnn_bins)}}},
          {"mda2", {{"match", to_json(d.mda2)}, {"scores", to_json(prf(d.mda2))}, {"bins", to_json(d.mda2_bins)}}},
          {"mda1", {{"match", to_json(d.mda1)}, {"scores", to_json(prf(d.mda1))}}}};
}

json to_json(const GeneralizationResult& g) {
  json rows = json::array();
  for (const auto& r : g.rows) {
    rows.push_back({{"regions", r.regions}, {"n_regions", r.regions.size()}, {"n_pixels", r.pixels}, {"mae", r.mae}});
  }
  return {{"holdout_region", g.holdout_region}, {"rows", rows}};
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"gapfill", "hidden", "ablation", "generalization", "detector-cv",
                                              "cirrus"};
  return names;
}

json run_experiment(const std::string& name, const ExperimentData& data, const RunConfig& cfg) {
  cfg.validate();
  data.dataset.validate();
  for (const auto& p : data.pools) p.validate(static_cast<std::size_t>(data.dataset.grid.length));
  if (std::find(experiment_names().begin(), experiment_names().end(), name) == experiment_names().end()) {
    throw ValidationError("unknown experiment '" + name + "'");
  }
  const std::uint64_t seed = derive_seed(cfg.seed, name);
  if (name == "generalization") return to_json(generalization_experiment(data, cfg, seed));
  const auto split = split_parcels(data.dataset, cfg.experiment.test_fraction, derive_seed(cfg.seed, "split"));
  if (name == "ablation") return to_json(ablation_experiment(data, split, cfg, seed));

  auto trained = train_gapfill(data, split.train, cfg.experiment.train_pixels_per_parcel, sf::SfArchitecture{}, cfg,
                               derive_seed(cfg.seed, "gapfill-model"));
  json out{{"training",
            {{"samples", trained.samples},
             {"density_rejected", trained.density_rejected},
             {"best_epoch", trained.report.best_epoch},
             {"stopped_epoch", trained.report.stopped_epoch},
             {"train_loss", trained.report.train_loss},
             {"validation_loss", trained.report.validation_loss}}}};
  if (name == "gapfill") {
    out["result"] = to_json(compare_gapfill(trained.model, data, split.test, cfg, seed));
  } else if (name == "hidden") {
    detect::DetectContext ctx;
    ctx.mda1 = cfg.mda1;
    ctx.mda2 = cfg.mda2;
    ctx.gapfill_model = &trained.model;
    out["result"] = to_json(hidden_event_experiment(
        data.dataset, split.test,
        {detect::FillMethod::None, detect::FillMethod::Linear, detect::FillMethod::Akima,
         detect::FillMethod::Quadratic, detect::FillMethod::Sf},
        detect::Algorithm::Mda1, ctx, cfg, seed));
  } else if (name == "detector-cv") {
    out["result"] = to_json(detector_cv(data, split.test, trained.model, cfg, seed));
  } else {
    out["result"] = to_json(cirrus_experiment(data.dataset, split.test, trained.model, cfg));
  }
  return out;
}

}  // namespace sarfuse::evalx
