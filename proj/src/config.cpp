#include "sarfuse/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>

#include "sarfuse/error.hpp"

namespace sarfuse {

using json = nlohmann::json;

void ExperimentConfig::validate() const {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ValidationError("experiment.test_fraction must lie in (0, 1)");
  if (train_pixels_per_parcel < 1 || eval_pixels_per_parcel < 1 || ablation_train_pixels_per_parcel < 1 ||
      detector_train_pixels_per_parcel < 1) {
    throw ValidationError("experiment pixel counts must be >= 1");
  }
  if (folds < 2) throw ValidationError("experiment.folds must be >= 2");
  if (tolerance_days < 0) throw ValidationError("experiment.tolerance_days must be >= 0");
  if (hidden_min_steps < 1 || hidden_max_steps < hidden_min_steps) {
    throw ValidationError("experiment hidden step range must satisfy 1 <= min <= max");
  }
}

void RunConfig::validate() const {
  outliers.validate();
  density.validate();
  train.validate();
  detector_train.validate();
  mda1.validate();
  mda2.validate();
  if (!(cloud_filter_threshold > 0.0)) throw ValidationError("cloud_filter_threshold must be > 0");
  if (!(decode_threshold > 0.0 && decode_threshold < 1.0)) throw ValidationError("decode_threshold must lie in (0, 1)");
  experiment.validate();
  synth.validate();
}

namespace {

json train_json(const sf::TrainConfig& t) {
  return {{"learning_rate", t.learning_rate}, {"batch_size", t.batch_size},
          {"max_epochs", t.max_epochs},       {"early_stop_patience", t.early_stop_patience},
          {"w_alpha", t.w_alpha},             {"w_beta", t.w_beta},
          {"w_interp", t.w_interp},           {"validation_fraction", t.validation_fraction},
          {"chunk_size", t.chunk_size}};
}

// Reads `key` into `out` when present.
template <typename T>
void take(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ValidationError(std::string("config key '") + key + "': " + e.what());
    }
  }
}

void reject_unknown(const json& j, const json& reference, const std::string& where) {
  if (!j.is_object()) throw ValidationError("config section '" + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!reference.contains(key)) {
      throw ValidationError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
    }
    if (reference[key].is_object()) reject_unknown(value, reference[key], where.empty() ? key : where + "." + key);
  }
}

void train_from(const json& j, sf::TrainConfig& t) {
  take(j, "learning_rate", t.learning_rate);
  take(j, "batch_size", t.batch_size);
  take(j, "max_epochs", t.max_epochs);
  take(j, "early_stop_patience", t.early_stop_patience);
  take(j, "w_alpha", t.w_alpha);
  take(j, "w_beta", t.w_beta);
  take(j, "w_interp", t.w_interp);
  take(j, "validation_fraction", t.validation_fraction);
  take(j, "chunk_size", t.chunk_size);
}

}  // namespace

json to_json(const RunConfig& c) {
  const auto& o = c.outliers;
  const auto& d = c.density;
  const auto& e = c.experiment;
  const auto& s = c.synth;
  return json{
      {"seed", c.seed},
      {"outliers", {{"alpha", o.alpha}, {"beta", o.beta}, {"gamma", o.gamma}, {"per_day", o.per_day}}},
      {"density",
       {{"max_consecutive_summer", d.max_consecutive_summer},
        {"max_total_summer", d.max_total_summer},
        {"max_consecutive_other", d.max_consecutive_other},
        {"max_overall_coverage", d.max_overall_coverage},
        {"summer_first_doy", d.summer_first_doy},
        {"summer_last_doy", d.summer_last_doy}}},
      {"train", train_json(c.train)},
      {"detector_train", train_json(c.detector_train)},
      {"mda1", {{"drop_threshold", c.mda1.drop_threshold}}},
      {"mda2",
       {{"residual_threshold", c.mda2.residual_threshold}, {"peak_min_prominence", c.mda2.peak_min_prominence}}},
      {"cloud_filter_threshold", c.cloud_filter_threshold},
      {"decode_threshold", c.decode_threshold},
      {"experiment",
       {{"test_fraction", e.test_fraction},
        {"train_pixels_per_parcel", e.train_pixels_per_parcel},
        {"eval_pixels_per_parcel", e.eval_pixels_per_parcel},
        {"ablation_train_pixels_per_parcel", e.ablation_train_pixels_per_parcel},
        {"detector_train_pixels_per_parcel", e.detector_train_pixels_per_parcel},
        {"folds", e.folds},
        {"tolerance_days", e.tolerance_days},
        {"hidden_min_steps", e.hidden_min_steps},
        {"hidden_max_steps", e.hidden_max_steps},
        {"generalization_holdout_region", e.generalization_holdout_region}}},
      {"synth",
       {{"n_parcels", s.n_parcels},
        {"pixels_per_parcel", s.pixels_per_parcel},
        {"n_regions", s.n_regions},
        {"mow_probabilities", s.mow_probabilities},
        {"event_first_doy", s.event_first_doy},
        {"event_last_doy", s.event_last_doy},
        {"min_event_separation_days", s.min_event_separation_days},
        {"drop_depth_min", s.drop_depth_min},
        {"drop_depth_max", s.drop_depth_max},
        {"half_recovery_days", s.half_recovery_days},
        {"noise_sd", s.noise_sd},
        {"pixel_jitter", s.pixel_jitter},
        {"cirrus_rate", s.cirrus_rate},
        {"cirrus_depth_min", s.cirrus_depth_min},
        {"cirrus_depth_max", s.cirrus_depth_max},
        {"real_gap_rate", s.real_gap_rate},
        {"mask_pool_size", s.mask_pool_size},
        {"mask_coverage", s.mask_coverage},
        {"seed", s.seed}}},
  };
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  reject_unknown(j, to_json(c), "");
  take(j, "seed", c.seed);
  if (j.contains("outliers")) {
    const auto& o = j["outliers"];
    take(o, "alpha", c.outliers.alpha);
    take(o, "beta", c.outliers.beta);
    take(o, "gamma", c.outliers.gamma);
    take(o, "per_day", c.outliers.per_day);
  }
  if (j.contains("density")) {
    const auto& d = j["density"];
    take(d, "max_consecutive_summer", c.density.max_consecutive_summer);
    take(d, "max_total_summer", c.density.max_total_summer);
    take(d, "max_consecutive_other", c.density.max_consecutive_other);
    take(d, "max_overall_coverage", c.density.max_overall_coverage);
    take(d, "summer_first_doy", c.density.summer_first_doy);
    take(d, "summer_last_doy", c.density.summer_last_doy);
  }
  if (j.contains("train")) train_from(j["train"], c.train);
  if (j.contains("detector_train")) train_from(j["detector_train"], c.detector_train);
  if (j.contains("mda1")) take(j["mda1"], "drop_threshold", c.mda1.drop_threshold);
  if (j.contains("mda2")) {
    take(j["mda2"], "residual_threshold", c.mda2.residual_threshold);
    take(j["mda2"], "peak_min_prominence", c.mda2.peak_min_prominence);
  }
  take(j, "cloud_filter_threshold", c.cloud_filter_threshold);
  take(j, "decode_threshold", c.decode_threshold);
  if (j.contains("experiment")) {
    const auto& e = j["experiment"];
    take(e, "test_fraction", c.experiment.test_fraction);
    take(e, "train_pixels_per_parcel", c.experiment.train_pixels_per_parcel);
    take(e, "eval_pixels_per_parcel", c.experiment.eval_pixels_per_parcel);
    take(e, "ablation_train_pixels_per_parcel", c.experiment.ablation_train_pixels_per_parcel);
    take(e, "detector_train_pixels_per_parcel", c.experiment.detector_train_pixels_per_parcel);
    take(e, "folds", c.experiment.folds);
    take(e, "tolerance_days", c.experiment.tolerance_days);
    take(e, "hidden_min_steps", c.experiment.hidden_min_steps);
    take(e, "hidden_max_steps", c.experiment.hidden_max_steps);
    take(e, "generalization_holdout_region", c.experiment.generalization_holdout_region);
  }
  if (j.contains("synth")) {
    const auto& s = j["synth"];
    take(s, "n_parcels", c.synth.n_parcels);
    take(s, "pixels_per_parcel", c.synth.pixels_per_parcel);
    take(s, "n_regions", c.synth.n_regions);
    take(s, "mow_probabilities", c.synth.mow_probabilities);
    take(s, "event_first_doy", c.synth.event_first_doy);
    take(s, "event_last_doy", c.synth.event_last_doy);
    take(s, "min_event_separation_days", c.synth.min_event_separation_days);
    take(s, "drop_depth_min", c.synth.drop_depth_min);
    take(s, "drop_depth_max", c.synth.drop_depth_max);
    take(s, "half_recovery_days", c.synth.half_recovery_days);
    take(s, "noise_sd", c.synth.noise_sd);
    take(s, "pixel_jitter", c.synth.pixel_jitter);
    take(s, "cirrus_rate", c.synth.cirrus_rate);
    take(s, "cirrus_depth_min", c.synth.cirrus_depth_min);
    take(s, "cirrus_depth_max", c.synth.cirrus_depth_max);
    take(s, "real_gap_rate", c.synth.real_gap_rate);
    take(s, "mask_pool_size", c.synth.mask_pool_size);
    take(s, "mask_coverage", c.synth.mask_coverage);
    take(s, "seed", c.synth.seed);
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeError("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("config " + path + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

namespace {

std::string env_name(const std::string& section, const std::string& key) {
  std::string name = kEnvPrefix;
  for (char ch : section.empty() ? key : section + "_" + key) name += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return name;
}

json parse_env_value(const std::string& name, const std::string& text, const json& current) {
  if (current.is_string()) return text;
  try {
    json v = json::parse(text);
    if (current.is_boolean() != v.is_boolean() || current.is_number() != v.is_number() ||
        current.is_array() != v.is_array()) {
      throw ValidationError("environment override " + name + " has the wrong type");
    }
    return v;
  } catch (const json::exception&) {
    throw ValidationError("environment override " + name + "='" + text + "' is not a valid value");
  }
}

}  // namespace

json apply_env_overrides(json j) {
  const json reference = to_json(RunConfig{});
  for (const auto& [key, value] : reference.items()) {
    if (value.is_object()) {
      for (const auto& [sub, subvalue] : value.items()) {
        const std::string name = env_name(key, sub);
        if (const char* env = std::getenv(name.c_str())) j[key][sub] = parse_env_value(name, env, subvalue);
      }
    } else {
      const std::string name = env_name("", key);
      if (const char* env = std::getenv(name.c_str())) j[key] = parse_env_value(name, env, value);
    }
  }
  return j;
}

json arch_to_json(const sf::SfArchitecture& a) {
  json channels = json::array();
  for (Channel c : a.sar_channels) channels.push_back(std::string(channel_name(c)));
  return json{{"use_ndvi", a.use_ndvi},       {"sar_channels", channels},    {"conv_filters", a.conv_filters},
              {"kernel", a.kernel},           {"pool", a.pool},              {"branch_dense", a.branch_dense},
              {"lstm_hidden", a.lstm_hidden}, {"head", a.head == sf::Head::Regression ? "regression" : "detection"},
              {"steps", a.steps}};
}

sf::SfArchitecture arch_from_json(const json& j) {
  try {
    sf::SfArchitecture a;
    a.use_ndvi = j.at("use_ndvi").get<bool>();
    a.sar_channels.clear();
    for (const auto& c : j.at("sar_channels")) a.sar_channels.push_back(channel_from_name(c.get<std::string>()));
    a.conv_filters = j.at("conv_filters").get<std::vector<int>>();
    a.kernel = j.at("kernel").get<int>();
    a.pool = j.at("pool").get<int>();
    a.branch_dense = j.at("branch_dense").get<std::vector<int>>();
    a.lstm_hidden = j.at("lstm_hidden").get<int>();
    const auto head = j.at("head").get<std::string>();
    if (head != "regression" && head != "detection") throw ValidationError("unknown head '" + head + "'");
    a.head = head == "regression" ? sf::Head::Regression : sf::Head::Detection;
    a.steps = j.at("steps").get<int>();
    a.validate();
    return a;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad architecture description: ") + e.what());
  }
}

}  // namespace sarfuse
