#include "sarfuse/features.hpp"

#include <cmath>
#include <string>

#include "sarfuse/error.hpp"

namespace sarfuse::features {

namespace {
void require_coherence(double c, const char* what) {
  if (!(c >= 0.0 && c <= 1.0)) {
    throw ValidationError(std::string(what) + " must lie in [0, 1], got " + std::to_string(c));
  }
}
}  // namespace

double to_db(double sigma_lin) {
  if (!(sigma_lin > 0.0)) throw ValidationError("to_db requires a positive input");
  return 10.0 * std::log10(sigma_lin);
}

double from_db(double sigma_db) { return std::pow(10.0, sigma_db / 10.0); }

double sigma0_ratio(double vv_lin, double vh_lin) {
  if (vh_lin == 0.0) throw ValidationError("sigma0_ratio: zero VH denominator");
  return vv_lin / vh_lin;
}

double sigma0_cross_ratio(double vh_db, double vv_db) { return vh_db - vv_db; }

double mixed_coherence(double coh_vv, double coh_vh) {
  require_coherence(coh_vv, "coh_vv");
  require_coherence(coh_vh, "coh_vh");
  return std::sqrt(coh_vv * coh_vh);
}

double rvi(double vh_lin, double vv_lin) {
  if (vh_lin < 0.0 || vv_lin < 0.0) throw ValidationError("rvi: negative backscatter");
  const double sum = vh_lin + vv_lin;
  if (!(sum > 0.0)) throw ValidationError("rvi: zero backscatter sum");
  return 4.0 * vh_lin / sum;
}

double ndvi(double nir, double red) {
  if (nir < 0.0 || red < 0.0) throw ValidationError("ndvi: negative reflectance");
  const double sum = nir + red;
  if (!(sum > 0.0)) throw ValidationError("ndvi: zero reflectance sum");
  return (nir - red) / sum;
}

std::array<double, kChannelCount> derive_channels(const RawSarSample& s) {
  std::array<double, kChannelCount> out{};
  out[static_cast<int>(Channel::Sigma0VvDb)] = to_db(s.sigma0_vv_lin);
  out[static_cast<int>(Channel::Sigma0VhDb)] = to_db(s.sigma0_vh_lin);
  out[static_cast<int>(Channel::CohVv)] = s.coh_vv;
  out[static_cast<int>(Channel::CohVh)] = s.coh_vh;
  out[static_cast<int>(Channel::Sigma0Ratio)] = sigma0_ratio(s.sigma0_vv_lin, s.sigma0_vh_lin);
  out[static_cast<int>(Channel::Sigma0CrossRatioDb)] =
      sigma0_cross_ratio(out[static_cast<int>(Channel::Sigma0VhDb)], out[static_cast<int>(Channel::Sigma0VvDb)]);
  out[static_cast<int>(Channel::MixedCoherence)] = mixed_coherence(s.coh_vv, s.coh_vh);
  out[static_cast<int>(Channel::Rvi)] = rvi(s.sigma0_vh_lin, s.sigma0_vv_lin);
  return out;
}

void derive_in_place(PixelSeries& px) {
  const std::size_t n = px.ndvi.size();
  for (Channel c : {Channel::Sigma0Ratio, Channel::Sigma0CrossRatioDb, Channel::MixedCoherence, Channel::Rvi}) {
    px.channel(c).resize(n);
  }
  for (std::size_t t = 0; t < n; ++t) {
    RawSarSample s;
    s.sigma0_vv_lin = from_db(px.channel(Channel::Sigma0VvDb)[t]);
    s.sigma0_vh_lin = from_db(px.channel(Channel::Sigma0VhDb)[t]);
    s.coh_vv = px.channel(Channel::CohVv)[t];
    s.coh_vh = px.channel(Channel::CohVh)[t];
    const auto derived = derive_channels(s);
    // The dB channels are kept as stored so write/read stays lossless.
    for (Channel c : {Channel::Sigma0Ratio, Channel::Sigma0CrossRatioDb, Channel::MixedCoherence, Channel::Rvi}) {
      px.channel(c)[t] = derived[static_cast<int>(c)];
    }
    px.channel(Channel::Sigma0CrossRatioDb)[t] =
        sigma0_cross_ratio(px.channel(Channel::Sigma0VhDb)[t], px.channel(Channel::Sigma0VvDb)[t]);
  }
}

}  // namespace sarfuse::features
