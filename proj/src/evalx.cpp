#include "sarfuse/evalx.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sarfuse/error.hpp"

namespace sarfuse::evalx {

std::string_view selector_name(Selector s) { return s == Selector::AllPresent ? "all" : "masked"; }

Selector selector_from_name(std::string_view name) {
  if (name == "all") return Selector::AllPresent;
  if (name == "masked") return Selector::MaskedOnly;
  throw ValidationError("unknown selector '" + std::string(name) + "' (all|masked)");
}

std::vector<std::uint8_t> select_steps(const NdviSeries& truth, const CloudMask* mask, Selector selector) {
  if (selector == Selector::MaskedOnly && mask == nullptr) throw ValidationError("masked selector needs a mask");
  if (mask != nullptr && mask->size() != truth.size()) throw ValidationError("mask length != series length");
  std::vector<std::uint8_t> sel(truth.size(), 0);
  for (std::size_t t = 0; t < truth.size(); ++t) {
    sel[t] = truth[t].has_value() && (selector == Selector::AllPresent || mask->cloudy(t)) ? 1 : 0;
  }
  return sel;
}

namespace {
void check_lengths(std::size_t a, std::size_t b, std::size_t c) {
  if (a != b || a != c) throw ValidationError("metric inputs differ in length");
}
}  // namespace

double mae(std::span<const double> pred, std::span<const double> truth, std::span<const std::uint8_t> selected) {
  check_lengths(pred.size(), truth.size(), selected.size());
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    if (!selected[t]) continue;
    sum += std::abs(truth[t] - pred[t]);
    ++n;
  }
  if (n == 0) throw ValidationError("mae: empty step selection");
  return sum / static_cast<double>(n);
}

namespace {
std::vector<double> dense_truth(const NdviSeries& truth) {
  std::vector<double> v(truth.size(), 0.0);
  for (std::size_t t = 0; t < truth.size(); ++t) v[t] = truth[t].value_or(0.0);
  return v;
}
}  // namespace

double mae(std::span<const double> pred, const NdviSeries& truth, const CloudMask* mask, Selector selector) {
  const auto sel = select_steps(truth, mask, selector);
  return mae(pred, dense_truth(truth), sel);
}

double r_squared(std::span<const double> pred, std::span<const double> truth, std::span<const std::uint8_t> selected) {
  check_lengths(pred.size(), truth.size(), selected.size());
  ErrorPool pool;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    if (selected[t]) pool.add(pred[t], truth[t]);
  }
  return pool.r_squared();
}

double r_squared(std::span<const double> pred, const NdviSeries& truth, const CloudMask* mask, Selector selector) {
  const auto sel = select_steps(truth, mask, selector);
  return r_squared(pred, dense_truth(truth), sel);
}

void ErrorPool::add(double pred, double truth) {
  pred_.push_back(pred);
  truth_.push_back(truth);
}

void ErrorPool::add(std::span<const double> pred, const NdviSeries& truth, std::span<const std::uint8_t> selected) {
  check_lengths(pred.size(), truth.size(), selected.size());
  for (std::size_t t = 0; t < pred.size(); ++t) {
    if (selected[t]) add(pred[t], *truth[t]);
  }
}

double ErrorPool::mae() const {
  if (pred_.empty()) throw ValidationError("mae: empty step selection");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred_.size(); ++i) sum += std::abs(truth_[i] - pred_[i]);
  return sum / static_cast<double>(pred_.size());
}

double ErrorPool::r_squared() const {
  if (pred_.size() < 2) throw ValidationError("r_squared needs at least two values");
  double mean = 0.0;
  for (double y : truth_) mean += y;
  mean /= static_cast<double>(truth_.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < pred_.size(); ++i) {
    ss_res += (truth_[i] - pred_[i]) * (truth_[i] - pred_[i]);
    ss_tot += (truth_[i] - mean) * (truth_[i] - mean);
  }
  if (!(ss_tot > 0.0)) throw ValidationError("r_squared: truth has zero variance");
  return 1.0 - ss_res / ss_tot;
}

MatchResult& MatchResult::operator+=(const MatchResult& other) {
  true_positive += other.true_positive;
  false_positive += other.false_positive;
  false_negative += other.false_negative;
  matched_pairs.insert(matched_pairs.end(), other.matched_pairs.begin(), other.matched_pairs.end());
  return *this;
}

MatchResult match_events(std::span<const int> predicted, std::span<const int> truth, int tolerance_days) {
  if (tolerance_days < 0) throw ValidationError("tolerance must be >= 0");
  std::vector<int> p(predicted.begin(), predicted.end());
  std::vector<int> q(truth.begin(), truth.end());
  std::sort(p.begin(), p.end());
  std::sort(q.begin(), q.end());
  // Points with equal-width windows: pairing the earliest compatible elements is optimal.
  MatchResult m;
  std::size_t i = 0, j = 0;
  while (i < p.size() && j < q.size()) {
    if (std::abs(p[i] - q[j]) <= tolerance_days) {
      m.matched_pairs.emplace_back(p[i], q[j]);
      ++i;
      ++j;
    } else if (p[i] < q[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  m.true_positive = static_cast<int>(m.matched_pairs.size());
  m.false_positive = static_cast<int>(p.size()) - m.true_positive;
  m.false_negative = static_cast<int>(q.size()) - m.true_positive;
  return m;
}

Prf prf(const MatchResult& m) {
  Prf r;
  const int tp = m.true_positive;
  if (tp + m.false_negative > 0) r.recall = static_cast<double>(tp) / (tp + m.false_negative);
  if (tp + m.false_positive > 0) r.precision = static_cast<double>(tp) / (tp + m.false_positive);
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

BinnedReport binned_report(std::span<const MatchResult> per_parcel, std::span<const double> coverage) {
  if (per_parcel.empty()) throw ValidationError("binned_report: no parcels");
  if (per_parcel.size() != coverage.size()) throw ValidationError("binned_report: length mismatch");
  BinnedReport rep;
  const double n = static_cast<double>(coverage.size());
  for (double c : coverage) rep.mu += c;
  rep.mu /= n;
  double var = 0.0;
  for (double c : coverage) var += (c - rep.mu) * (c - rep.mu);
  rep.sigma = std::max(std::sqrt(var / n), 1e-6);
  const std::array<double, 5> edges{0.0, rep.mu - rep.sigma, rep.mu, rep.mu + rep.sigma, 1.0};
  for (int b = 0; b < 4; ++b) {
    rep.bins[b].lower = edges[b];
    rep.bins[b].upper = edges[b + 1];
  }
  for (std::size_t i = 0; i < coverage.size(); ++i) {
    int b = 3;
    if (coverage[i] < edges[1]) {
      b = 0;
    } else if (coverage[i] < edges[2]) {
      b = 1;
    } else if (coverage[i] < edges[3]) {
      b = 2;
    }
    rep.bins[b].parcels += 1;
    rep.bins[b].match += per_parcel[i];
  }
  for (auto& bin : rep.bins) bin.scores = prf(bin.match);
  return rep;
}

}  // namespace sarfuse::evalx
