#include "sarfuse/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "sarfuse/cloudsim.hpp"
#include "sarfuse/config.hpp"
#include "sarfuse/detect.hpp"
#include "sarfuse/error.hpp"
#include "sarfuse/evalx.hpp"
#include "sarfuse/experiments.hpp"
#include "sarfuse/interp.hpp"
#include "sarfuse/io.hpp"
#include "sarfuse/preprocess.hpp"
#include "sarfuse/seed.hpp"
#include "sarfuse/sfmodel.hpp"

namespace sarfuse {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

/// Tracks files written by one command so a failure can remove them.
class Outputs {
 public:
  void add(const std::string& path) { paths_.push_back(path); }
  const std::vector<std::string>& paths() const { return paths_; }
  void remove_all() {
    for (const auto& p : paths_) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }

 private:
  std::vector<std::string> paths_;
};

struct Context {
  std::vector<std::string> args;
  std::ostream& out;
  Outputs outputs;
  std::vector<std::string> inputs;
};

RunConfig resolve_config(const std::string& path) {
  json j = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw RuntimeError("cannot open config " + path);
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ValidationError("config " + path + " is not valid JSON: " + e.what());
    }
  }
  return run_config_from_json(apply_env_overrides(j));
}

json file_entries(const std::vector<std::string>& paths) {
  json arr = json::array();
  for (const auto& p : paths) arr.push_back({{"path", p}, {"sha256", io::file_sha256(p)}});
  return arr;
}

json manifest_base(const Context& ctx, const std::string& command, const RunConfig* cfg) {
  json m{{"tool", "sarfuse"},
         {"version", kVersion},
         {"compiler", __VERSION__},
         {"command", command},
         {"args", ctx.args},
         {"inputs", file_entries(ctx.inputs)}};
  if (cfg != nullptr) {
    const json c = to_json(*cfg);
    m["config"] = c;
    m["config_sha256"] = io::sha256_hex(c.dump());
    m["seed"] = cfg->seed;
  }
  return m;
}

void write_json(const std::string& path, const json& j) {
  io::atomic_write(path, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
}

void write_manifest(Context& ctx, const std::string& path, json manifest) {
  manifest["outputs"] = file_entries(ctx.outputs.paths());
  write_json(path, manifest);
  ctx.outputs.add(path);
}

Dataset load_dataset(Context& ctx, const std::string& path, const std::string& labels_path = "") {
  ctx.inputs.push_back(path);
  Dataset ds = io::read_dataset(path);
  if (!labels_path.empty()) {
    ctx.inputs.push_back(labels_path);
    ds.labels = io::read_labels(labels_path);
    ds.validate();
  }
  return ds;
}

std::vector<cloudsim::MaskPool> load_masks(Context& ctx, const std::string& path, const TemporalGrid& grid) {
  ctx.inputs.push_back(path);
  auto pools = io::read_masks(path);
  for (const auto& p : pools) p.validate(static_cast<std::size_t>(grid.length));
  return pools;
}

sf::SfModel load_model(Context& ctx, const std::string& path) {
  ctx.inputs.push_back(path);
  return sf::SfModel::load(path);
}

// ---- subcommands ---------------------------------------------------------

struct SynthArgs {
  int parcels = 0;
  int pixels = 0;
  int regions = 0;
  long long seed = -1;
  double cirrus = -1.0;
  std::string config;
  std::string out;
};

void cmd_synth(Context& ctx, const SynthArgs& a) {
  RunConfig cfg = resolve_config(a.config);
  if (!a.config.empty()) ctx.inputs.push_back(a.config);
  if (a.parcels > 0) cfg.synth.n_parcels = a.parcels;
  if (a.pixels > 0) cfg.synth.pixels_per_parcel = a.pixels;
  if (a.regions > 0) cfg.synth.n_regions = a.regions;
  if (a.seed >= 0) cfg.synth.seed = static_cast<std::uint64_t>(a.seed);
  if (a.cirrus >= 0.0) cfg.synth.cirrus_rate = a.cirrus;
  cfg.validate();
  const auto result = cloudsim::synth_dataset(cfg.synth);
  fs::create_directories(a.out);
  const std::string ds = (fs::path(a.out) / "dataset.csv").string();
  const std::string labels = (fs::path(a.out) / "labels.csv").string();
  const std::string masks = (fs::path(a.out) / "masks.csv").string();
  ctx.outputs.add(ds);
  io::write_dataset(result.dataset, ds);
  ctx.outputs.add(labels);
  io::write_labels(result.dataset.labels, labels);
  ctx.outputs.add(masks);
  io::write_masks(result.pools, masks);
  write_manifest(ctx, (fs::path(a.out) / "manifest.json").string(), manifest_base(ctx, "synth", &cfg));
  ctx.out << "synth: " << result.dataset.pixels.size() << " pixels, " << result.dataset.labels.size()
          << " parcels -> " << a.out << '\n';
}

struct PreprocessArgs {
  std::string dataset, out, config;
  std::optional<double> alpha, beta, gamma;
  bool per_day = false;
  bool density_filter = false;
};

void cmd_preprocess(Context& ctx, const PreprocessArgs& a) {
  RunConfig cfg = resolve_config(a.config);
  if (a.alpha) cfg.outliers.alpha = *a.alpha;
  if (a.beta) cfg.outliers.beta = *a.beta;
  if (a.gamma) cfg.outliers.gamma = *a.gamma;
  if (a.per_day) cfg.outliers.per_day = true;
  cfg.validate();
  Dataset ds = load_dataset(ctx, a.dataset);
  std::size_t removed = 0, dropped = 0;
  std::vector<PixelSeries> kept;
  for (auto& p : ds.pixels) {
    const auto before = p.present_count();
    p.ndvi = preprocess::remove_outliers(p.ndvi, ds.grid, cfg.outliers);
    removed += before - p.present_count();
    if (a.density_filter && !preprocess::passes_density(p.ndvi, ds.grid, cfg.density)) {
      ++dropped;
      continue;
    }
    kept.push_back(std::move(p));
  }
  ds.pixels = std::move(kept);
  ctx.outputs.add(a.out);
  io::write_dataset(ds, a.out);
  json m = manifest_base(ctx, "preprocess", &cfg);
  m["metrics"] = {{"outliers_removed", removed}, {"pixels_dropped", dropped}};
  write_manifest(ctx, a.out + ".manifest.json", m);
  ctx.out << "preprocess: removed " << removed << " outliers, dropped " << dropped << " pixels\n";
}

struct MaskArgs {
  std::string dataset, masks, out, assignments;
  long long seed = 0;
};

void cmd_mask(Context& ctx, const MaskArgs& a) {
  Dataset ds = load_dataset(ctx, a.dataset);
  evalx::ExperimentData data{std::move(ds), {}};
  data.pools = load_masks(ctx, a.masks, data.dataset.grid);
  const auto parcels = data.dataset.parcel_ids();
  const auto masks = evalx::parcel_masks(data, parcels, static_cast<std::uint64_t>(a.seed));
  double coverage = 0.0;
  for (auto& p : data.dataset.pixels) {
    const CloudMask& m = masks.at(p.parcel_id);
    p = cloudsim::apply_mask(p, m);
    coverage += m.coverage();
  }
  ctx.outputs.add(a.out);
  io::write_dataset(data.dataset, a.out);
  if (!a.assignments.empty()) {
    ctx.outputs.add(a.assignments);
    io::atomic_write(a.assignments, [&](std::ostream& o) {
      o << "parcel_id";
      for (int t = 0; t < data.dataset.grid.length; ++t) o << ",bit_" << t;
      o << '\n';
      for (const auto& id : parcels) {
        o << id;
        for (auto b : masks.at(id).bits) o << ',' << static_cast<int>(b != 0);
        o << '\n';
      }
    });
  }
  json m = manifest_base(ctx, "mask", nullptr);
  m["seed"] = a.seed;
  m["metrics"] = {{"mean_coverage", coverage / static_cast<double>(data.dataset.pixels.size())}};
  write_manifest(ctx, a.out + ".manifest.json", m);
  ctx.out << "mask: mean coverage " << coverage / static_cast<double>(data.dataset.pixels.size()) << '\n';
}

struct TrainArgs {
  std::string dataset, masks, labels, config, out;
  std::string head = "regression";
};

void cmd_train(Context& ctx, const TrainArgs& a) {
  const RunConfig cfg = resolve_config(a.config);
  if (!a.config.empty()) ctx.inputs.push_back(a.config);
  json metrics;
  if (a.head == "regression") {
    if (a.masks.empty()) throw ValidationError("train: regression head needs --masks");
    evalx::ExperimentData data{load_dataset(ctx, a.dataset), {}};
    data.pools = load_masks(ctx, a.masks, data.dataset.grid);
    sf::SfArchitecture arch;
    arch.steps = data.dataset.grid.length;
    auto trained = evalx::train_gapfill(data, data.dataset.parcel_ids(), cfg.experiment.train_pixels_per_parcel, arch,
                                        cfg, derive_seed(cfg.seed, "train-command"));
    ctx.outputs.add(a.out);
    trained.model.save(a.out);
    metrics = {{"samples", trained.samples},
               {"best_epoch", trained.report.best_epoch},
               {"stopped_epoch", trained.report.stopped_epoch},
               {"train_loss", trained.report.train_loss},
               {"validation_loss", trained.report.validation_loss}};
  } else if (a.head == "detection") {
    if (a.labels.empty()) throw ValidationError("train: detection head needs --labels");
    const Dataset ds = load_dataset(ctx, a.dataset, a.labels);
    const auto pixels = evalx::sample_pixels(ds, ds.parcel_ids(), cfg.experiment.detector_train_pixels_per_parcel,
                                             derive_seed(cfg.seed, "detector-pixels"));
    sf::SfModel detector(detect::detector_architecture(ds.grid.length), derive_seed(cfg.seed, "detector-init"));
    detector.stats = sf::NormStats::compute(pixels);
    std::vector<std::vector<double>> labels;
    double pos = 0.0, neg = 0.0;
    for (const auto* p : pixels) {
      if (p->present_count() != p->ndvi.size()) {
        throw ValidationError("train: detection input must be gap-filled (pixel " + p->pixel_id + ")");
      }
      const ParcelLabel* l = ds.find_label(p->parcel_id);
      if (l == nullptr) throw ValidationError("train: parcel " + p->parcel_id + " has no label");
      labels.push_back(detect::detector_labels(*l, ds.grid));
      for (double y : labels.back()) (y > 0.5 ? pos : neg) += 1.0;
    }
    if (pos == 0.0) throw ValidationError("train: no labeled events");
    std::vector<sf::TrainingSample> samples;
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      samples.push_back(
          detect::make_detection_sample(*pixels[i], labels[i], detector.stats, detector.arch(), neg / pos));
    }
    sf::TrainConfig tc = cfg.detector_train;
    tc.seed = derive_seed(cfg.seed, "detector-train");
    const auto report = sf::train(detector, samples, tc);
    ctx.outputs.add(a.out);
    detector.save(a.out);
    metrics = {{"samples", samples.size()},
               {"pos_weight", neg / pos},
               {"best_epoch", report.best_epoch},
               {"train_loss", report.train_loss},
               {"validation_loss", report.validation_loss}};
  } else {
    throw ValidationError("train: --head must be regression or detection");
  }
  json m = manifest_base(ctx, "train", &cfg);
  m["metrics"] = metrics;
  write_manifest(ctx, a.out + ".manifest.json", m);
  ctx.out << "train: model written to " << a.out << '\n';
}

struct GapfillArgs {
  std::string dataset, method, model, out;
  bool cloud_filter = false;
  double threshold = 0.15;
};

void cmd_gapfill(Context& ctx, const GapfillArgs& a) {
  Dataset ds = load_dataset(ctx, a.dataset);
  std::size_t unfilled = 0;
  if (a.method == "sf") {
    if (a.model.empty()) throw ValidationError("gapfill: --method sf needs --model");
    const sf::SfModel model = load_model(ctx, a.model);
    if (a.cloud_filter) {
      const sf::GapfillOptions opt{true, a.threshold};
#pragma omp parallel for schedule(dynamic)
      for (std::size_t i = 0; i < ds.pixels.size(); ++i) {
        const auto filled = sf::gapfill_sf(model, ds.pixels[i], opt);
        for (std::size_t t = 0; t < filled.size(); ++t) ds.pixels[i].ndvi[t] = filled[t];
      }
    } else {
      std::vector<const PixelSeries*> ptrs;
      for (const auto& p : ds.pixels) ptrs.push_back(&p);
      const auto filled = evalx::sf_fill_batch(model, ptrs);
      for (std::size_t i = 0; i < ds.pixels.size(); ++i) {
        for (std::size_t t = 0; t < filled[i].size(); ++t) ds.pixels[i].ndvi[t] = filled[i][t];
      }
    }
  } else {
    if (a.cloud_filter) throw ValidationError("gapfill: --cloud-filter needs --method sf");
    const auto method = interp::method_from_name(a.method);
    for (auto& p : ds.pixels) {
      if (p.present_count() < interp::min_knots(method)) {
        ++unfilled;
        continue;
      }
      const auto filled = interp::fill(p.ndvi, ds.grid, method);
      for (std::size_t t = 0; t < filled.size(); ++t) p.ndvi[t] = filled[t];
    }
  }
  ctx.outputs.add(a.out);
  io::write_dataset(ds, a.out);
  json m = manifest_base(ctx, "gapfill", nullptr);
  m["method"] = a.method;
  m["unfilled_pixels"] = unfilled;
  write_manifest(ctx, a.out + ".manifest.json", m);
  ctx.out << "gapfill: " << ds.pixels.size() - unfilled << " pixels filled with " << a.method;
  if (unfilled > 0) ctx.out << ", " << unfilled << " left as is (too few observations)";
  ctx.out << '\n';
}

struct CloudfilterArgs {
  std::string dataset, model, out, cleaned;
  double threshold = 0.15;
};

void cmd_cloudfilter(Context& ctx, const CloudfilterArgs& a) {
  Dataset ds = load_dataset(ctx, a.dataset);
  const sf::SfModel model = load_model(ctx, a.model);
  std::vector<std::vector<std::uint8_t>> flags(ds.pixels.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < ds.pixels.size(); ++i) flags[i] = sf::cloud_filter(model, ds.pixels[i], a.threshold);
  std::size_t flagged = 0;
  ctx.outputs.add(a.out);
  io::atomic_write(a.out, [&](std::ostream& o) {
    o << "pixel_id,step,doy\n";
    for (std::size_t i = 0; i < ds.pixels.size(); ++i) {
      for (std::size_t t = 0; t < flags[i].size(); ++t) {
        if (!flags[i][t]) continue;
        ++flagged;
        o << ds.pixels[i].pixel_id << ',' << t << ',' << ds.grid.doy(static_cast<int>(t)) << '\n';
      }
    }
  });
  if (!a.cleaned.empty()) {
    for (std::size_t i = 0; i < ds.pixels.size(); ++i) {
      for (std::size_t t = 0; t < flags[i].size(); ++t) {
        if (flags[i][t]) ds.pixels[i].ndvi[t].reset();
      }
    }
    ctx.outputs.add(a.cleaned);
    io::write_dataset(ds, a.cleaned);
  }
  json m = manifest_base(ctx, "cloudfilter", nullptr);
  m["threshold"] = a.threshold;
  m["metrics"] = {{"flagged_steps", flagged}};
  write_manifest(ctx, a.out + ".manifest.json", m);
  ctx.out << "cloudfilter: flagged " << flagged << " steps\n";
}

struct DetectArgs {
  std::string dataset, algo = "mda1", fill = "none", model, detector, out, config;
  bool cloud_filter = false;
};

void cmd_detect(Context& ctx, const DetectArgs& a) {
  const RunConfig cfg = resolve_config(a.config);
  const Dataset ds = load_dataset(ctx, a.dataset);
  detect::DetectContext dctx;
  dctx.mda1 = cfg.mda1;
  dctx.mda2 = cfg.mda2;
  dctx.decode_threshold = cfg.decode_threshold;
  dctx.gapfill.cloud_filter = a.cloud_filter;
  dctx.gapfill.threshold = cfg.cloud_filter_threshold;
  const auto algorithm = detect::algorithm_from_name(a.algo);
  const auto fill = detect::fill_from_name(a.fill);
  std::optional<sf::SfModel> gapfill, detector;
  if (fill == detect::FillMethod::Sf) {
    if (a.model.empty()) throw ValidationError("detect: --fill sf needs --model");
    gapfill = load_model(ctx, a.model);
    dctx.gapfill_model = &*gapfill;
  }
  if (algorithm == detect::Algorithm::Dnn) {
    if (a.detector.empty()) throw ValidationError("detect: --algo dnn needs --detector");
    detector = load_model(ctx, a.detector);
    dctx.detector = &*detector;
  }
  const auto parcels = ds.parcel_ids();
  std::vector<detect::EventSet> found(parcels.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < parcels.size(); ++i) found[i] = detect::detect_parcel(ds, parcels[i], algorithm, fill, dctx);
  io::EventTable table;
  std::size_t n = 0;
  for (std::size_t i = 0; i < parcels.size(); ++i) {
    n += found[i].size();
    table[parcels[i]] = found[i];
  }
  ctx.outputs.add(a.out);
  io::write_events(table, a.out);
  json m = manifest_base(ctx, "detect", &cfg);
  m["algorithm"] = a.algo;
  m["fill"] = a.fill;
  write_manifest(ctx, a.out + ".manifest.json", m);
  ctx.out << "detect: " << n << " events in " << parcels.size() << " parcels\n";
}

struct EvalArgs {
  std::string events, labels, truth_events;
  std::string pred, truth, masked, selector = "all";
  int tolerance = 12;
  std::string out;
};

void cmd_eval(Context& ctx, const EvalArgs& a) {
  json report;
  if (!a.events.empty()) {
    ctx.inputs.push_back(a.events);
    const auto predicted = io::read_events(a.events);
    io::EventTable truth;
    if (!a.truth_events.empty()) {
      ctx.inputs.push_back(a.truth_events);
      truth = io::read_events(a.truth_events);
    } else if (!a.labels.empty()) {
      ctx.inputs.push_back(a.labels);
      for (const auto& l : io::read_labels(a.labels)) truth[l.parcel_id].doys = l.event_doys;
    } else {
      throw ValidationError("eval: --events needs --labels or --truth-events");
    }
    evalx::MatchResult total;
    for (const auto& [parcel, set] : truth) {
      const auto it = predicted.find(parcel);
      const std::vector<int> none;
      total += evalx::match_events(it == predicted.end() ? none : it->second.doys, set.doys, a.tolerance);
    }
    for (const auto& [parcel, set] : predicted) {
      if (!truth.count(parcel)) total += evalx::match_events(set.doys, {}, a.tolerance);
    }
    report = {{"match", evalx::to_json(total)}, {"scores", evalx::to_json(evalx::prf(total))},
              {"tolerance_days", a.tolerance}};
  } else if (!a.pred.empty()) {
    if (a.truth.empty()) throw ValidationError("eval: --pred needs --truth");
    const Dataset pred = load_dataset(ctx, a.pred);
    const Dataset truth = load_dataset(ctx, a.truth);
    const auto selector = evalx::selector_from_name(a.selector);
    std::optional<Dataset> masked;
    if (selector == evalx::Selector::MaskedOnly) {
      if (a.masked.empty()) throw ValidationError("eval: --selector masked needs --masked (the masked input dataset)");
      masked = load_dataset(ctx, a.masked);
    }
    std::unordered_map<std::string, std::size_t> pred_index, masked_index;
    for (std::size_t i = 0; i < pred.pixels.size(); ++i) pred_index[pred.pixels[i].pixel_id] = i;
    if (masked) {
      for (std::size_t i = 0; i < masked->pixels.size(); ++i) masked_index[masked->pixels[i].pixel_id] = i;
    }
    evalx::ErrorPool pool;
    std::size_t unscored = 0;  // pixels the filler left with gaps
    for (const auto& tp : truth.pixels) {
      const auto pit = pred_index.find(tp.pixel_id);
      if (pit == pred_index.end()) throw ValidationError("eval: pixel " + tp.pixel_id + " missing from predictions");
      const auto& pp = pred.pixels[pit->second];
      if (pp.present_count() < pp.ndvi.size()) {
        ++unscored;
        continue;
      }
      std::vector<double> values(pp.ndvi.size());
      for (std::size_t t = 0; t < values.size(); ++t) values[t] = *pp.ndvi[t];
      CloudMask hidden;
      if (masked) {
        const auto mit = masked_index.find(tp.pixel_id);
        if (mit == masked_index.end()) throw ValidationError("eval: pixel " + tp.pixel_id + " missing from masked input");
        const auto& mp = masked->pixels[mit->second];
        hidden.bits.resize(tp.ndvi.size());
        for (std::size_t t = 0; t < tp.ndvi.size(); ++t) hidden.bits[t] = tp.ndvi[t] && !mp.ndvi[t] ? 1 : 0;
      }
      const auto sel = evalx::select_steps(tp.ndvi, masked ? &hidden : nullptr, selector);
      pool.add(values, tp.ndvi, sel);
    }
    if (pool.size() == 0) throw ValidationError("eval: no fully predicted pixels to score");
    report = {{"selector", a.selector},    {"steps", pool.size()},       {"mae", pool.mae()},
              {"r2", pool.r_squared()},    {"unscored_pixels", unscored}};
  } else {
    throw ValidationError("eval: give --events (event scoring) or --pred (gap-fill scoring)");
  }
  if (!a.out.empty()) {
    ctx.outputs.add(a.out);
    write_json(a.out, report);
    json m = manifest_base(ctx, "eval", nullptr);
    m["metrics"] = report;
    write_manifest(ctx, a.out + ".manifest.json", m);
  }
  ctx.out << report.dump(2) << '\n';
}

struct ExperimentArgs {
  std::string name, data, dataset, labels, masks, config, out;
};

evalx::ExperimentData load_experiment_data(Context& ctx, const std::string& dataset, const std::string& labels,
                                           const std::string& masks) {
  evalx::ExperimentData data{load_dataset(ctx, dataset, labels), {}};
  data.pools = load_masks(ctx, masks, data.dataset.grid);
  return data;
}

void cmd_experiment(Context& ctx, const ExperimentArgs& a) {
  std::string dataset = a.dataset, labels = a.labels, masks = a.masks;
  if (!a.data.empty()) {
    dataset = (fs::path(a.data) / "dataset.csv").string();
    labels = (fs::path(a.data) / "labels.csv").string();
    masks = (fs::path(a.data) / "masks.csv").string();
  }
  if (dataset.empty() || labels.empty() || masks.empty()) {
    throw ValidationError("experiment: give --data DIR or all of --dataset, --labels, --masks");
  }
  const RunConfig cfg = resolve_config(a.config);
  const auto data = load_experiment_data(ctx, dataset, labels, masks);
  const json metrics = evalx::run_experiment(a.name, data, cfg);
  ctx.outputs.add(a.out);
  write_json(a.out, metrics);
  json m = manifest_base(ctx, "experiment", &cfg);
  m["experiment"] = a.name;
  m["input_roles"] = {{"dataset", dataset}, {"labels", labels}, {"masks", masks}};
  m["metrics_sha256"] = io::sha256_hex(metrics.dump());
  write_manifest(ctx, a.out + ".manifest.json", m);
  ctx.out << "experiment " << a.name << ": report written to " << a.out << '\n';
}

struct RerunArgs {
  std::string manifest, out;
};

void cmd_rerun(Context& ctx, const RerunArgs& a) {
  std::ifstream in(a.manifest);
  if (!in) throw RuntimeError("cannot open manifest " + a.manifest);
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("manifest is not valid JSON: " + std::string(e.what()));
  }
  if (m.value("command", "") != "experiment") throw ValidationError("rerun supports experiment manifests only");
  for (const auto& entry : m.at("inputs")) {
    const std::string path = entry.at("path");
    if (io::file_sha256(path) != entry.at("sha256").get<std::string>()) {
      throw RuntimeError("input " + path + " changed since the manifest was written");
    }
  }
  const RunConfig cfg = run_config_from_json(m.at("config"));
  const auto& roles = m.at("input_roles");
  const auto data = load_experiment_data(ctx, roles.at("dataset"), roles.at("labels"), roles.at("masks"));
  const json metrics = evalx::run_experiment(m.at("experiment").get<std::string>(), data, cfg);
  const std::string digest = io::sha256_hex(metrics.dump());
  if (!a.out.empty()) {
    ctx.outputs.add(a.out);
    write_json(a.out, metrics);
  }
  const bool same = digest == m.at("metrics_sha256").get<std::string>();
  ctx.out << "rerun: metrics " << (same ? "identical" : "DIFFER") << " (sha256 " << digest << ")\n";
  if (!same) throw RuntimeError("rerun produced different metrics");
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gap filling and mowing detection on fused SAR/optical time series", "sarfuse"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic grassland dataset");
  s->add_option("--parcels", synth.parcels, "Number of parcels");
  s->add_option("--pixels-per-parcel", synth.pixels, "Pixels per parcel");
  s->add_option("--regions", synth.regions, "Number of regions");
  s->add_option("--seed", synth.seed, "Generator seed");
  s->add_option("--cirrus-rate", synth.cirrus, "Probability of an undetected cloud dip per parcel step");
  s->add_option("--config", synth.config, "Run config JSON");
  s->add_option("--out", synth.out, "Output directory")->required();

  PreprocessArgs pre;
  auto* p = app.add_subcommand("preprocess", "Remove residual-cloud outliers");
  p->add_option("--dataset", pre.dataset)->required();
  p->add_option("--out", pre.out)->required();
  p->add_option("--config", pre.config);
  p->add_option("--alpha", pre.alpha, "Minimum drop into the step");
  p->add_option("--beta", pre.beta, "Minimum rise out of the step");
  p->add_option("--gamma", pre.gamma, "Floor on next minus previous");
  p->add_flag("--per-day", pre.per_day, "Use per-day rates");
  p->add_flag("--density-filter", pre.density_filter, "Drop pixels failing the density criteria");

  MaskArgs mask;
  auto* mk = app.add_subcommand("mask", "Hide NDVI with bootstrapped parcel masks");
  mk->add_option("--dataset", mask.dataset)->required();
  mk->add_option("--masks", mask.masks)->required();
  mk->add_option("--out", mask.out)->required();
  mk->add_option("--seed", mask.seed);
  mk->add_option("--assignments", mask.assignments, "Write the per-parcel masks here");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train the SF gap-filling model or the DNN detector");
  t->add_option("--dataset", train.dataset)->required();
  t->add_option("--masks", train.masks);
  t->add_option("--labels", train.labels);
  t->add_option("--config", train.config);
  t->add_option("--head", train.head, "regression | detection");
  t->add_option("--out", train.out)->required();

  GapfillArgs gap;
  auto* g = app.add_subcommand("gapfill", "Fill NDVI gaps");
  g->add_option("--dataset", gap.dataset)->required();
  g->add_option("--method", gap.method, "linear | akima | quadratic | sf")->required();
  g->add_option("--model", gap.model);
  g->add_flag("--cloud-filter", gap.cloud_filter);
  g->add_option("--threshold", gap.threshold);
  g->add_option("--out", gap.out)->required();

  CloudfilterArgs cf;
  auto* c = app.add_subcommand("cloudfilter", "Flag observations far below the SF prediction");
  c->add_option("--dataset", cf.dataset)->required();
  c->add_option("--model", cf.model)->required();
  c->add_option("--threshold", cf.threshold);
  c->add_option("--out", cf.out)->required();
  c->add_option("--cleaned", cf.cleaned, "Also write the dataset with flagged steps removed");

  DetectArgs det;
  auto* d = app.add_subcommand("detect", "Detect mowing events per parcel");
  d->add_option("--dataset", det.dataset)->required();
  d->add_option("--algo", det.algo, "mda1 | mda2 | dnn");
  d->add_option("--fill", det.fill, "none | linear | akima | quadratic | sf");
  d->add_option("--model", det.model, "SF model for --fill sf");
  d->add_option("--detector", det.detector, "Detector model for --algo dnn");
  d->add_flag("--cloud-filter", det.cloud_filter, "Cloud-filter mode for SF filling");
  d->add_option("--config", det.config);
  d->add_option("--out", det.out)->required();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score events or gap-filled series");
  e->add_option("--events", ev.events);
  e->add_option("--labels", ev.labels);
  e->add_option("--truth-events", ev.truth_events);
  e->add_option("--tolerance", ev.tolerance);
  e->add_option("--pred", ev.pred);
  e->add_option("--truth", ev.truth);
  e->add_option("--masked", ev.masked);
  e->add_option("--selector", ev.selector, "all | masked");
  e->add_option("--out", ev.out);

  ExperimentArgs ex;
  auto* x = app.add_subcommand("experiment", "Run an evaluation protocol");
  x->add_option("name", ex.name, "gapfill | hidden | ablation | generalization | detector-cv | cirrus")->required();
  x->add_option("--data", ex.data, "Directory written by synth");
  x->add_option("--dataset", ex.dataset);
  x->add_option("--labels", ex.labels);
  x->add_option("--masks", ex.masks);
  x->add_option("--config", ex.config);
  x->add_option("--out", ex.out)->required();

  RerunArgs rr;
  auto* r = app.add_subcommand("rerun", "Re-execute an experiment from its manifest and compare metrics");
  r->add_option("--manifest", rr.manifest)->required();
  r->add_option("--out", rr.out);

  std::vector<std::string> argv_storage{"sarfuse"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& h) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& pe) {
    err << "error: " << pe.what() << '\n';
    return 2;
  }

  Context ctx{args, out, {}, {}};
  try {
    if (s->parsed()) cmd_synth(ctx, synth);
    else if (p->parsed()) cmd_preprocess(ctx, pre);
    else if (mk->parsed()) cmd_mask(ctx, mask);
    else if (t->parsed()) cmd_train(ctx, train);
    else if (g->parsed()) cmd_gapfill(ctx, gap);
    else if (c->parsed()) cmd_cloudfilter(ctx, cf);
    else if (d->parsed()) cmd_detect(ctx, det);
    else if (e->parsed()) cmd_eval(ctx, ev);
    else if (x->parsed()) cmd_experiment(ctx, ex);
    else if (r->parsed()) cmd_rerun(ctx, rr);
    return 0;
  } catch (const ValidationError& ve) {
    ctx.outputs.remove_all();
    err << "validation error: " << ve.what() << '\n';
    return 2;
  } catch (const std::exception& re) {
    ctx.outputs.remove_all();
    err << "error: " << re.what() << '\n';
    return 3;
  }
}

}  // namespace sarfuse
