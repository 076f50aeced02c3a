#include "sarfuse/sfmodel.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <unordered_set>

#include "json.hpp"
#include "sarfuse/config.hpp"
#include "sarfuse/error.hpp"
#include "sarfuse/nn/adam.hpp"
#include "sarfuse/nn/layers.hpp"
#include "sarfuse/nn/loss.hpp"
#include "sarfuse/nn/serialize.hpp"
#include "sarfuse/seed.hpp"

namespace sarfuse::sf {

using nn::Matrix;
using json = nlohmann::json;

namespace {

int worker_count(Execution exec) { return exec == Execution::Parallel ? omp_get_max_threads() : 1; }

}  // namespace

SfModel::SfModel(const SfArchitecture& arch, std::uint64_t seed) : arch_(arch), network_(arch_, params_) {
  network_.init(params_, seed);
  params_.round_to_float();
}

SfModel::SfModel(const SfModel& other) : stats(other.stats), trained(other.trained), arch_(other.arch_) {
  network_ = SfNetwork(arch_, params_);
  std::copy(other.params_.values().begin(), other.params_.values().end(), params_.values().begin());
}

SfModel& SfModel::operator=(const SfModel& other) {
  if (this != &other) {
    SfModel copy(other);
    arch_ = copy.arch_;
    params_ = std::move(copy.params_);
    network_ = std::move(copy.network_);
    stats = copy.stats;
    trained = copy.trained;
  }
  return *this;
}

void SfModel::write(std::ostream& out) const {
  json meta{{"format", "sarfuse-sf"}, {"architecture", arch_to_json(arch_)}, {"trained", trained}};
  if (!stats.empty()) meta["norm"] = json{{"mean", stats.mean}, {"sd", stats.sd}};
  nn::write_params(out, params_, meta.dump());
}

SfModel SfModel::read(std::istream& in) {
  nn::ParamFile file = nn::read_params(in);
  json meta;
  try {
    meta = json::parse(file.metadata);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model metadata is not valid JSON: ") + e.what());
  }
  if (meta.value("format", "") != "sarfuse-sf") throw ValidationError("not an SF model file");
  SfModel model(arch_from_json(meta.at("architecture")), 0);
  if (!(model.params_.entries().size() == file.params.entries().size())) {
    throw ValidationError("model file tensors do not match its architecture");
  }
  for (std::size_t i = 0; i < file.params.entries().size(); ++i) {
    const auto& a = model.params_.info(i);
    const auto& b = file.params.info(i);
    if (a.name != b.name || a.shape != b.shape) throw ValidationError("model tensor mismatch at " + b.name);
  }
  std::copy(file.params.values().begin(), file.params.values().end(), model.params_.values().begin());
  model.trained = meta.value("trained", false);
  if (meta.contains("norm")) {
    model.stats.mean = meta["norm"].at("mean").get<std::vector<double>>();
    model.stats.sd = meta["norm"].at("sd").get<std::vector<double>>();
    model.stats.validate();
  }
  return model;
}

void SfModel::save(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw RuntimeError("cannot open " + tmp + " for writing");
    write(out);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw RuntimeError("cannot move model into place at " + path);
}

SfModel SfModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError("cannot open model " + path);
  return read(in);
}

std::vector<std::vector<double>> predict(const SfModel& model, std::span<const EncodedSample* const> samples,
                                         Execution exec, int chunk_size) {
  const auto n = static_cast<std::int64_t>(samples.size());
  const std::int64_t chunks = (n + chunk_size - 1) / chunk_size;
  std::vector<std::vector<double>> out(samples.size());
  const bool regression = model.arch().head == Head::Regression;
  const int T = model.arch().steps;
#pragma omp parallel for schedule(dynamic) num_threads(worker_count(exec))
  for (std::int64_t c = 0; c < chunks; ++c) {
    const std::int64_t begin = c * chunk_size;
    const std::int64_t end = std::min(n, begin + chunk_size);
    const auto part = samples.subspan(static_cast<std::size_t>(begin), static_cast<std::size_t>(end - begin));
    const EncodedBatch batch = make_batch(part, model.arch());
    SfNetwork::Cache cache;
    model.network().forward(model.params(), batch, cache);
    for (int i = 0; i < batch.batch; ++i) {
      auto& row = out[static_cast<std::size_t>(begin + i)];
      row.resize(T);
      for (int t = 0; t < T; ++t) {
        const double z = cache.output(static_cast<Eigen::Index>(t) * batch.batch + i, 0);
        row[t] = regression ? std::clamp(z, -1.0, 1.0) : nn::sigmoid(z);
      }
    }
  }
  return out;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be > 0");
  if (batch_size < 1 || max_epochs < 1 || chunk_size < 1) throw ValidationError("batch, epochs, chunk must be >= 1");
  if (early_stop_patience < 1) throw ValidationError("early_stop_patience must be >= 1");
  if (w_alpha < 0.0 || w_beta < 0.0 || w_interp < 0.0) throw ValidationError("loss weights must be >= 0");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ValidationError("validation_fraction must lie in [0, 1)");
  }
}

namespace {

double weight_sum(std::span<const TrainingSample* const> batch) {
  double s = 0.0;
  for (const auto* ts : batch) {
    for (double w : ts->weight) s += w;
  }
  return s;
}

// Loss sum and gradient of one chunk, normalized by the whole-batch weight sum.
double chunk_loss_and_gradient(const SfModel& model, std::span<const TrainingSample* const> part, double normalizer,
                               std::span<double> grad) {
  std::vector<const EncodedSample*> inputs;
  inputs.reserve(part.size());
  for (const auto* ts : part) inputs.push_back(&ts->input);
  const EncodedBatch batch = make_batch(inputs, model.arch());
  SfNetwork::Cache cache;
  model.network().forward(model.params(), batch, cache);
  const int T = batch.steps;
  const int B = batch.batch;
  const std::size_t n = static_cast<std::size_t>(T) * B;
  std::vector<double> out(n), target(n), weight(n), d_out(n);
  for (int i = 0; i < B; ++i) {
    const auto& ts = *part[i];
    if (ts.target.size() != static_cast<std::size_t>(T) || ts.weight.size() != static_cast<std::size_t>(T)) {
      throw ValidationError("training sample target/weight length mismatch");
    }
    for (int t = 0; t < T; ++t) {
      const std::size_t r = static_cast<std::size_t>(t) * B + i;
      out[r] = cache.output(static_cast<Eigen::Index>(r), 0);
      target[r] = ts.target[t];
      weight[r] = ts.weight[t];
    }
  }
  const double loss = model.arch().head == Head::Regression
                          ? nn::weighted_squared_error(out, target, weight, normalizer, d_out)
                          : nn::weighted_bce_logits(out, target, weight, normalizer, d_out);
  const Matrix d_output = Eigen::Map<const Matrix>(d_out.data(), static_cast<Eigen::Index>(n), 1);
  model.network().backward(model.params(), batch, cache, d_output, grad);
  return loss;
}

// Gradient-free loss sum over many samples, chunked like the training path.
double evaluate_loss(const SfModel& model, std::span<const TrainingSample* const> samples, Execution exec,
                     int chunk_size) {
  if (samples.empty()) return 0.0;
  const double normalizer = weight_sum(samples);
  if (!(normalizer > 0.0)) return 0.0;
  const auto n = static_cast<std::int64_t>(samples.size());
  const std::int64_t chunks = (n + chunk_size - 1) / chunk_size;
  std::vector<double> partial(static_cast<std::size_t>(chunks), 0.0);
  const bool regression = model.arch().head == Head::Regression;
#pragma omp parallel for schedule(dynamic) num_threads(worker_count(exec))
  for (std::int64_t c = 0; c < chunks; ++c) {
    const std::int64_t begin = c * chunk_size;
    const std::int64_t end = std::min(n, begin + chunk_size);
    const auto part = samples.subspan(static_cast<std::size_t>(begin), static_cast<std::size_t>(end - begin));
    std::vector<const EncodedSample*> inputs;
    for (const auto* ts : part) inputs.push_back(&ts->input);
    const EncodedBatch batch = make_batch(inputs, model.arch());
    SfNetwork::Cache cache;
    model.network().forward(model.params(), batch, cache);
    const int T = batch.steps;
    const int B = batch.batch;
    std::vector<double> out, target, weight;
    for (int i = 0; i < B; ++i) {
      for (int t = 0; t < T; ++t) {
        out.push_back(cache.output(static_cast<Eigen::Index>(t) * B + i, 0));
        target.push_back(part[i]->target[t]);
        weight.push_back(part[i]->weight[t]);
      }
    }
    partial[static_cast<std::size_t>(c)] = regression ? nn::weighted_squared_error(out, target, weight, 1.0, {})
                                                      : nn::weighted_bce_logits(out, target, weight, 1.0, {});
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total / normalizer;
}

}  // namespace

double loss_and_gradient(const SfModel& model, std::span<const TrainingSample* const> batch, std::span<double> grad,
                         Execution exec, int chunk_size) {
  if (grad.size() != model.params().size()) throw ValidationError("gradient buffer size mismatch");
  if (batch.empty()) throw ValidationError("empty batch");
  const double normalizer = weight_sum(batch);
  if (!(normalizer > 0.0)) throw ValidationError("all loss weights in the batch are zero");
  const auto n = static_cast<std::int64_t>(batch.size());
  const std::int64_t chunks = (n + chunk_size - 1) / chunk_size;
  std::vector<std::vector<double>> chunk_grads(static_cast<std::size_t>(chunks));
  std::vector<double> chunk_loss(static_cast<std::size_t>(chunks), 0.0);
#pragma omp parallel for schedule(dynamic) num_threads(worker_count(exec))
  for (std::int64_t c = 0; c < chunks; ++c) {
    const std::int64_t begin = c * chunk_size;
    const std::int64_t end = std::min(n, begin + chunk_size);
    auto& g = chunk_grads[static_cast<std::size_t>(c)];
    g.assign(grad.size(), 0.0);
    chunk_loss[static_cast<std::size_t>(c)] = chunk_loss_and_gradient(
        model, batch.subspan(static_cast<std::size_t>(begin), static_cast<std::size_t>(end - begin)), normalizer, g);
  }
  // Single reduction point, fixed order.
  std::fill(grad.begin(), grad.end(), 0.0);
  double loss = 0.0;
  for (std::size_t c = 0; c < chunk_grads.size(); ++c) {
    loss += chunk_loss[c];
    const auto& g = chunk_grads[c];
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
  }
  return loss / normalizer;
}

TrainReport train(SfModel& model, std::span<const TrainingSample> samples, const TrainConfig& config,
                  Execution exec) {
  config.validate();
  if (samples.empty()) throw ValidationError("cannot train on an empty dataset");
  std::vector<const TrainingSample*> all;
  all.reserve(samples.size());
  for (const auto& s : samples) all.push_back(&s);
  {
    std::vector<const TrainingSample*> ptrs(all);
    if (!(weight_sum(ptrs) > 0.0)) throw ValidationError("all training weights are zero");
  }

  std::mt19937_64 rng(config.seed);
  std::vector<std::uint64_t> groups;
  for (const auto* s : all) groups.push_back(s->group);
  std::sort(groups.begin(), groups.end());
  groups.erase(std::unique(groups.begin(), groups.end()), groups.end());
  std::shuffle(groups.begin(), groups.end(), rng);
  auto n_val_groups =
      static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(groups.size())));
  if (n_val_groups >= groups.size()) n_val_groups = 0;
  const std::unordered_set<std::uint64_t> val_groups(groups.begin(),
                                                     groups.begin() + static_cast<std::ptrdiff_t>(n_val_groups));
  std::vector<const TrainingSample*> validation;
  std::vector<const TrainingSample*> training;
  if (groups.size() == 1) {
    std::shuffle(all.begin(), all.end(), rng);
    auto n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(all.size())));
    if (n_val >= all.size()) n_val = 0;
    validation.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_val));
    training.assign(all.begin() + static_cast<std::ptrdiff_t>(n_val), all.end());
  } else {
    for (const auto* s : all) (val_groups.contains(s->group) ? validation : training).push_back(s);
    std::shuffle(training.begin(), training.end(), rng);
  }

  TrainReport report;
  report.train_samples = training.size();
  report.validation_samples = validation.size();

  nn::AdamState adam(model.params().size(), config.learning_rate);
  std::vector<double> grad(model.params().size());
  std::vector<double> best_params(model.params().values().begin(), model.params().values().end());
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(training.begin(), training.end(), rng);
    double loss_acc = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < training.size(); begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(training.size(), begin + static_cast<std::size_t>(config.batch_size));
      const std::span<const TrainingSample* const> batch(training.data() + begin, end - begin);
      if (!(weight_sum(batch) > 0.0)) continue;
      loss_acc += loss_and_gradient(model, batch, grad, exec, config.chunk_size);
      ++batches;
      nn::adam_step(adam, model.params().values(), grad);
      model.params().round_to_float();
    }
    report.train_loss.push_back(batches > 0 ? loss_acc / static_cast<double>(batches) : 0.0);
    const double monitored = validation.empty() ? evaluate_loss(model, training, exec, 64)
                                                : evaluate_loss(model, validation, exec, 64);
    report.validation_loss.push_back(monitored);
    report.stopped_epoch = epoch;
    if (monitored < best) {
      best = monitored;
      report.best_epoch = epoch;
      since_best = 0;
      std::copy(model.params().values().begin(), model.params().values().end(), best_params.begin());
    } else if (++since_best >= config.early_stop_patience) {
      break;
    }
  }
  std::copy(best_params.begin(), best_params.end(), model.params().values().begin());
  model.trained = true;
  return report;
}

TrainingSample make_gapfill_sample(const PixelSeries& pixel, const std::vector<double>& target,
                                   const std::vector<std::uint8_t>& observed, const CloudMask& mask,
                                   const NormStats& stats, const SfArchitecture& arch, const TrainConfig& config) {
  const std::size_t T = pixel.ndvi.size();
  if (target.size() != T || observed.size() != T || mask.size() != T) {
    throw ValidationError("make_gapfill_sample: length mismatch");
  }
  PixelSeries hidden = pixel;
  for (std::size_t t = 0; t < T; ++t) {
    if (mask.cloudy(t)) hidden.ndvi[t].reset();
  }
  TrainingSample s;
  s.input = encode_inputs(hidden, stats, arch);
  s.group = derive_seed(0, pixel.parcel_id);
  s.target = target;
  s.weight.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    if (!observed[t]) {
      s.weight[t] = config.w_interp;
    } else {
      s.weight[t] = mask.cloudy(t) ? config.w_alpha : config.w_beta;
    }
  }
  return s;
}

namespace {
void require_trained(const SfModel& model) {
  if (!model.trained) throw RuntimeError("model has not been trained");
  if (model.stats.empty()) throw RuntimeError("model has no normalization stats");
}
}  // namespace

std::vector<std::uint8_t> cloud_filter(const SfModel& model, const PixelSeries& pixel, double threshold) {
  require_trained(model);
  if (model.arch().head != Head::Regression) throw ValidationError("cloud filter needs a regression model");
  const std::size_t T = pixel.ndvi.size();
  std::vector<std::size_t> present;
  for (std::size_t t = 0; t < T; ++t) {
    if (pixel.ndvi[t]) present.push_back(t);
  }
  std::vector<std::uint8_t> flags(T, 0);
  if (present.empty()) return flags;
  const EncodedSample base = encode_inputs(pixel, model.stats, model.arch());
  std::vector<EncodedSample> variants(present.size(), base);
  std::vector<const EncodedSample*> ptrs;
  for (std::size_t k = 0; k < present.size(); ++k) {
    variants[k].ndvi[present[k]] = kMaskedNdviSentinel;
    variants[k].presence[present[k]] = 0.0;
    ptrs.push_back(&variants[k]);
  }
  const auto preds = predict(model, ptrs, Execution::Serial);
  for (std::size_t k = 0; k < present.size(); ++k) {
    const std::size_t t = present[k];
    if (preds[k][t] - *pixel.ndvi[t] >= threshold) flags[t] = 1;
  }
  return flags;
}

std::vector<double> gapfill_sf(const SfModel& model, const PixelSeries& pixel, const GapfillOptions& options) {
  require_trained(model);
  if (model.arch().head != Head::Regression) throw ValidationError("gap filling needs a regression model");
  PixelSeries input = pixel;
  if (options.cloud_filter) {
    const auto flags = cloud_filter(model, pixel, options.threshold);
    for (std::size_t t = 0; t < flags.size(); ++t) {
      if (flags[t]) input.ndvi[t].reset();
    }
  }
  const EncodedSample e = encode_inputs(input, model.stats, model.arch());
  const EncodedSample* ptr = &e;
  const auto pred = predict(model, std::span<const EncodedSample* const>(&ptr, 1), Execution::Serial).front();
  std::vector<double> out(pred.size());
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = input.ndvi[t] ? *input.ndvi[t] : pred[t];
  return out;
}

}  // namespace sarfuse::sf
