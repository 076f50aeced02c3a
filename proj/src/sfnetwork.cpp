#include <cmath>

#include "sarfuse/error.hpp"
#include "sarfuse/nn/gradcheck.hpp"
#include "sarfuse/sfmodel.hpp"

namespace sarfuse::sf {

using nn::Matrix;

void SfArchitecture::validate() const {
  if (branch_count() == 0) throw ValidationError("architecture needs at least one input branch");
  if (conv_filters.empty() || branch_dense.empty()) throw ValidationError("architecture needs conv and dense layers");
  if (kernel < 1 || kernel % 2 == 0) throw ValidationError("conv kernel must be odd and >= 1");
  if (pool < 1) throw ValidationError("pool size must be >= 1");
  if (lstm_hidden < 1 || steps < 1) throw ValidationError("lstm_hidden and steps must be >= 1");
  for (int f : conv_filters) {
    if (f < 1) throw ValidationError("conv filter counts must be >= 1");
  }
  for (int d : branch_dense) {
    if (d < 1) throw ValidationError("dense sizes must be >= 1");
  }
}

NormStats NormStats::compute(std::span<const PixelSeries* const> pixels) {
  if (pixels.empty()) throw ValidationError("cannot compute normalization stats without pixels");
  NormStats s;
  s.mean.assign(kChannelCount, 0.0);
  s.sd.assign(kChannelCount, 0.0);
  for (int c = 0; c < kChannelCount; ++c) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const PixelSeries* px : pixels) {
      for (double v : px->channels[c]) sum += v;
      n += px->channels[c].size();
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const PixelSeries* px : pixels) {
      for (double v : px->channels[c]) ss += (v - mean) * (v - mean);
    }
    // Stored at float precision, like every other model value.
    s.mean[c] = static_cast<double>(static_cast<float>(mean));
    s.sd[c] = static_cast<double>(static_cast<float>(std::sqrt(ss / static_cast<double>(n))));
  }
  s.validate();
  return s;
}

void NormStats::validate() const {
  if (mean.size() != kChannelCount || sd.size() != kChannelCount) {
    throw ValidationError("normalization stats must cover all eight channels");
  }
  for (int c = 0; c < kChannelCount; ++c) {
    if (!(sd[c] > 0.0)) {
      throw ValidationError("degenerate channel " + std::string(channel_name(static_cast<Channel>(c))) +
                            ": zero standard deviation");
    }
  }
}

EncodedSample encode_inputs(const PixelSeries& pixel, const NormStats& stats, const SfArchitecture& arch) {
  if (stats.empty()) throw ValidationError("encode_inputs: missing normalization stats");
  stats.validate();
  const std::size_t steps = pixel.ndvi.size();
  if (steps != static_cast<std::size_t>(arch.steps)) throw ValidationError("series length does not match model steps");
  EncodedSample e;
  e.ndvi.resize(steps);
  e.presence.resize(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    e.presence[t] = pixel.ndvi[t] ? 1.0 : 0.0;
    e.ndvi[t] = pixel.ndvi[t] ? *pixel.ndvi[t] : kMaskedNdviSentinel;
  }
  const std::size_t nsar = arch.sar_channels.size();
  e.sar.resize(steps * nsar);
  for (std::size_t j = 0; j < nsar; ++j) {
    const int c = static_cast<int>(arch.sar_channels[j]);
    const auto& values = pixel.channels[c];
    if (values.size() != steps) throw ValidationError("SAR channel length does not match NDVI length");
    for (std::size_t t = 0; t < steps; ++t) e.sar[t * nsar + j] = (values[t] - stats.mean[c]) / stats.sd[c];
  }
  return e;
}

EncodedBatch make_batch(std::span<const EncodedSample* const> samples, const SfArchitecture& arch) {
  EncodedBatch b;
  b.steps = arch.steps;
  b.batch = static_cast<int>(samples.size());
  const Eigen::Index rows = static_cast<Eigen::Index>(b.steps) * b.batch;
  const std::size_t nsar = arch.sar_channels.size();
  if (arch.use_ndvi) {
    Matrix m(rows, 2);
    for (int i = 0; i < b.batch; ++i) {
      const auto& s = *samples[i];
      if (s.ndvi.size() != static_cast<std::size_t>(b.steps) || s.presence.size() != s.ndvi.size()) {
        throw ValidationError("sample length mismatch");
      }
      for (int t = 0; t < b.steps; ++t) {
        // Masking: hidden steps carry the sentinel whatever the stored value.
        const bool present = s.presence[t] > 0.5;
        m(static_cast<Eigen::Index>(t) * b.batch + i, 0) = present ? s.ndvi[t] : kMaskedNdviSentinel;
        m(static_cast<Eigen::Index>(t) * b.batch + i, 1) = present ? 1.0 : 0.0;
      }
    }
    b.branches.push_back(std::move(m));
  }
  for (std::size_t j = 0; j < nsar; ++j) {
    Matrix m(rows, 1);
    for (int i = 0; i < b.batch; ++i) {
      const auto& s = *samples[i];
      if (s.sar.size() != static_cast<std::size_t>(b.steps) * nsar) throw ValidationError("sample SAR size mismatch");
      for (int t = 0; t < b.steps; ++t) m(static_cast<Eigen::Index>(t) * b.batch + i, 0) = s.sar[t * nsar + j];
    }
    b.branches.push_back(std::move(m));
  }
  return b;
}

SfNetwork::SfNetwork(const SfArchitecture& arch, nn::ParamStore& store) : arch_(arch) {
  arch_.validate();
  const int nb = arch_.branch_count();
  for (int k = 0; k < nb; ++k) {
    const bool ndvi_branch = arch_.use_ndvi && k == 0;
    const std::string prefix =
        ndvi_branch ? std::string("branch.ndvi")
                    : "branch." + std::string(channel_name(arch_.sar_channels[k - (arch_.use_ndvi ? 1 : 0)]));
    Branch br;
    br.input_channels = ndvi_branch ? 2 : 1;
    int width = br.input_channels;
    for (std::size_t i = 0; i < arch_.conv_filters.size(); ++i) {
      br.convs.push_back(nn::Conv1d::create(store, prefix + ".conv" + std::to_string(i), width,
                                            arch_.conv_filters[i], arch_.kernel));
      width = arch_.conv_filters[i];
    }
    for (std::size_t i = 0; i < arch_.branch_dense.size(); ++i) {
      br.dense.push_back(nn::Dense::create(store, prefix + ".dense" + std::to_string(i), width, arch_.branch_dense[i]));
      width = arch_.branch_dense[i];
    }
    branches_.push_back(std::move(br));
  }
  const int feature_width = nb * arch_.branch_dense.back();
  encoder_ = nn::BiLstm::create(store, "encoder", feature_width, arch_.lstm_hidden);
  decoder_ = nn::BiLstm::create(store, "decoder", encoder_.output_size(), arch_.lstm_hidden);
  head_ = nn::Dense::create(store, "head", decoder_.output_size(), 1);
}

void SfNetwork::init(nn::ParamStore& store, std::uint64_t seed) const {
  nn::Rng rng(seed);
  for (const auto& br : branches_) {
    for (const auto& c : br.convs) c.init(store, rng);
    for (const auto& d : br.dense) d.init(store, rng);
  }
  encoder_.init(store, rng);
  decoder_.init(store, rng);
  head_.init(store, rng);
}

void SfNetwork::forward(const nn::ParamStore& store, const EncodedBatch& batch, Cache& cache) const {
  const int nb = static_cast<int>(branches_.size());
  if (static_cast<int>(batch.branches.size()) != nb || batch.steps != arch_.steps) {
    throw ValidationError("batch does not match the network architecture");
  }
  const int T = batch.steps;
  const int B = batch.batch;
  const int emb = arch_.branch_dense.back();
  cache.branches.resize(nb);
  cache.features.resize(static_cast<Eigen::Index>(T) * B, static_cast<Eigen::Index>(nb) * emb);
  for (int k = 0; k < nb; ++k) {
    const Branch& br = branches_[k];
    BranchCache& bc = cache.branches[k];
    bc.input = batch.branches[k];
    if (bc.input.cols() != br.input_channels) throw ValidationError("branch input width mismatch");
    if (arch_.use_ndvi && k == 0) {
      // Masking layer: hidden steps contribute nothing regardless of their value.
      bc.input.col(0) = (bc.input.col(1).array() > 0.5).select(bc.input.col(0), 0.0);
    }
    bc.conv.resize(br.convs.size());
    const Matrix* x = &bc.input;
    for (std::size_t i = 0; i < br.convs.size(); ++i) {
      br.convs[i].forward(store, *x, T, B, bc.conv[i]);
      x = &bc.conv[i];
    }
    nn::maxpool1d_forward(*x, T, B, arch_.pool, bc.pooled, bc.argmax);
    nn::relu_forward(bc.pooled, bc.activated);
    bc.dense.resize(br.dense.size());
    x = &bc.activated;
    for (std::size_t i = 0; i < br.dense.size(); ++i) {
      br.dense[i].forward(store, *x, bc.dense[i]);
      x = &bc.dense[i];
    }
    cache.features.middleCols(static_cast<Eigen::Index>(k) * emb, emb) = *x;
  }
  nn::bilstm_forward(store, encoder_, cache.features, T, B, cache.encoder);
  nn::bilstm_forward(store, decoder_, cache.encoder.output, T, B, cache.decoder);
  head_.forward(store, cache.decoder.output, cache.output);
}

void SfNetwork::backward(const nn::ParamStore& store, const EncodedBatch& batch, const Cache& cache,
                         const Matrix& d_output, std::span<double> grad) const {
  const int T = batch.steps;
  const int B = batch.batch;
  const int emb = arch_.branch_dense.back();
  Matrix d_dec;
  head_.backward(store, cache.decoder.output, d_output, &d_dec, grad);
  Matrix d_enc;
  nn::bilstm_backward(store, decoder_, cache.encoder.output, T, B, cache.decoder, d_dec, &d_enc, grad);
  Matrix d_features;
  nn::bilstm_backward(store, encoder_, cache.features, T, B, cache.encoder, d_enc, &d_features, grad);
  Matrix dy;
  Matrix dx;
  for (std::size_t k = 0; k < branches_.size(); ++k) {
    const Branch& br = branches_[k];
    const BranchCache& bc = cache.branches[k];
    dy = d_features.middleCols(static_cast<Eigen::Index>(k) * emb, emb);
    for (std::size_t i = br.dense.size(); i-- > 0;) {
      const Matrix& in = i == 0 ? bc.activated : bc.dense[i - 1];
      br.dense[i].backward(store, in, dy, &dx, grad);
      std::swap(dx, dy);
    }
    nn::relu_backward(bc.pooled, dy, dx);
    nn::maxpool1d_backward(dx, T, B, bc.argmax, dy);
    for (std::size_t i = br.convs.size(); i-- > 0;) {
      const Matrix& in = i == 0 ? bc.input : bc.conv[i - 1];
      br.convs[i].backward(store, in, T, B, dy, i == 0 ? nullptr : &dx, grad);
      if (i > 0) std::swap(dx, dy);
    }
  }
}

std::uint64_t SfNetwork::activation_pattern(const Cache& cache) const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& bc : cache.branches) {
    for (int a : bc.argmax) h = nn::fingerprint_mix(h, static_cast<std::uint64_t>(a));
    for (Eigen::Index i = 0; i < bc.pooled.size(); ++i) {
      h = nn::fingerprint_mix(h, bc.pooled.data()[i] > 0.0 ? 1u : 0u);
    }
  }
  return h;
}

}  // namespace sarfuse::sf
