#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sarfuse/core.hpp"
#include "sarfuse/nn/lstm.hpp"
#include "sarfuse/nn/params.hpp"

namespace sarfuse::sf {

enum class Head { Regression, Detection };

/// Layer sizes of the fusion network. The NDVI branch (when enabled) comes first,
/// followed by one branch per SAR channel in `sar_channels` order.
struct SfArchitecture {
  bool use_ndvi = true;
  std::vector<Channel> sar_channels{kAllChannels.begin(), kAllChannels.end()};
  std::vector<int> conv_filters{8, 16};
  int kernel = 3;
  int pool = 3;
  std::vector<int> branch_dense{32, 16};
  int lstm_hidden = 16;
  Head head = Head::Regression;
  int steps = 29;

  int branch_count() const { return static_cast<int>(sar_channels.size()) + (use_ndvi ? 1 : 0); }
  void validate() const;
  bool operator==(const SfArchitecture&) const = default;
};

/// Value the NDVI input carries at hidden steps; far outside the valid range.
inline constexpr double kMaskedNdviSentinel = -10.0;

/// Per-channel z-score statistics of the SAR inputs (all eight channels).
struct NormStats {
  std::vector<double> mean;
  std::vector<double> sd;

  static NormStats compute(std::span<const PixelSeries* const> pixels);
  void validate() const;
  bool empty() const { return mean.empty(); }
  bool operator==(const NormStats&) const = default;
};

/// Network-ready form of one pixel series.
struct EncodedSample {
  std::vector<double> ndvi;      // observed value, or the sentinel where hidden
  std::vector<double> presence;  // 1 observed, 0 hidden
  std::vector<double> sar;       // steps x sar_channels, step-major, z-scored
};

EncodedSample encode_inputs(const PixelSeries& pixel, const NormStats& stats, const SfArchitecture& arch);

/// Branch inputs for a batch in the (steps * batch) x channels layout. The NDVI
/// branch receives two channels: value (with sentinels) and presence.
struct EncodedBatch {
  int steps = 0;
  int batch = 0;
  std::vector<nn::Matrix> branches;
};

EncodedBatch make_batch(std::span<const EncodedSample* const> samples, const SfArchitecture& arch);

/// CNN branches -> concatenation -> BiLSTM encoder -> BiLSTM decoder -> per-step
/// dense head. Forward returns the raw head output (no clamp, no sigmoid).
class SfNetwork {
 public:
  SfNetwork() = default;
  SfNetwork(const SfArchitecture& arch, nn::ParamStore& store);

  void init(nn::ParamStore& store, std::uint64_t seed) const;

  struct BranchCache {
    nn::Matrix input;
    std::vector<nn::Matrix> conv;
    nn::Matrix pooled;
    std::vector<int> argmax;
    nn::Matrix activated;
    std::vector<nn::Matrix> dense;
  };
  struct Cache {
    std::vector<BranchCache> branches;
    nn::Matrix features;
    nn::BiLstmCache encoder;
    nn::BiLstmCache decoder;
    nn::Matrix output;  // (steps * batch) x 1
  };

  void forward(const nn::ParamStore& store, const EncodedBatch& batch, Cache& cache) const;
  /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
  void backward(const nn::ParamStore& store, const EncodedBatch& batch, const Cache& cache,
                const nn::Matrix& d_output, std::span<double> grad) const;
  /// Fingerprint of ReLU signs and pooling winners for kink-aware gradient checks.
  std::uint64_t activation_pattern(const Cache& cache) const;

 private:
  struct Branch {
    int input_channels = 1;
    std::vector<nn::Conv1d> convs;
    std::vector<nn::Dense> dense;
  };
  SfArchitecture arch_;
  std::vector<Branch> branches_;
  nn::BiLstm encoder_;
  nn::BiLstm decoder_;
  nn::Dense head_;
};

/// Architecture, parameters and input normalization of one trained network.
class SfModel {
 public:
  SfModel() = default;
  SfModel(const SfArchitecture& arch, std::uint64_t seed);
  SfModel(const SfModel& other);
  SfModel& operator=(const SfModel& other);

  const SfArchitecture& arch() const { return arch_; }
  const SfNetwork& network() const { return network_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  NormStats stats;
  bool trained = false;

  void write(std::ostream& out) const;
  static SfModel read(std::istream& in);
  void save(const std::string& path) const;
  static SfModel load(const std::string& path);

 private:
  SfArchitecture arch_;
  nn::ParamStore params_;
  SfNetwork network_;
};

enum class Execution { Serial, Parallel };

/// Network outputs for a set of samples, one length-T vector each. Regression
/// heads are clamped to [-1, 1]; detection heads return sigmoid probabilities.
std::vector<std::vector<double>> predict(const SfModel& model, std::span<const EncodedSample* const> samples,
                                         Execution exec = Execution::Parallel, int chunk_size = 64);

struct TrainConfig {
  double learning_rate = 0.005;
  int batch_size = 256;
  int max_epochs = 30;
  int early_stop_patience = 3;
  double w_alpha = 0.75;  // artificially hidden, observed target
  double w_beta = 0.25;   // visible, observed target
  double w_interp = 0.0;  // target produced by interpolation
  double validation_fraction = 0.1;
  int chunk_size = 32;
  std::uint64_t seed = 42;

  void validate() const;
};

/// One supervised example: inputs, per-step target and per-step loss weight.
struct TrainingSample {
  EncodedSample input;
  std::vector<double> target;
  std::vector<double> weight;
  // Samples with equal group land on the same side of the validation split.
  std::uint64_t group = 0;
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  int best_epoch = 0;     // 1-based
  int stopped_epoch = 0;  // 1-based, last epoch run
  std::size_t train_samples = 0;
  std::size_t validation_samples = 0;
};

/// Normalized loss of `batch` and its gradient (written to `grad`). The batch is
/// cut into fixed chunks whose gradients are summed in chunk order, so Serial and
/// Parallel produce identical bits.
double loss_and_gradient(const SfModel& model, std::span<const TrainingSample* const> batch, std::span<double> grad,
                         Execution exec = Execution::Parallel, int chunk_size = 32);

/// Adam on the weighted loss (MSE for regression, BCE for detection) with early
/// stopping on a held-out split; restores the best-validation parameters.
TrainReport train(SfModel& model, std::span<const TrainingSample> samples, const TrainConfig& config,
                  Execution exec = Execution::Parallel);

/// Builds a regression sample: the pixel's NDVI hidden by `mask` as input, the
/// complete target with weights w_alpha / w_beta / w_interp.
TrainingSample make_gapfill_sample(const PixelSeries& pixel, const std::vector<double>& target,
                                   const std::vector<std::uint8_t>& observed, const CloudMask& mask,
                                   const NormStats& stats, const SfArchitecture& arch, const TrainConfig& config);

struct GapfillOptions {
  bool cloud_filter = false;
  double threshold = 0.15;
};

/// Fills absent NDVI steps with the model prediction; observed steps are kept
/// unless cloud-filter mode flags and replaces them.
std::vector<double> gapfill_sf(const SfModel& model, const PixelSeries& pixel, const GapfillOptions& options = {});

/// Flags present steps whose observation lies at least `threshold` below the
/// model's prediction for that step made with the observation itself hidden.
std::vector<std::uint8_t> cloud_filter(const SfModel& model, const PixelSeries& pixel, double threshold = 0.15);

}  // namespace sarfuse::sf
