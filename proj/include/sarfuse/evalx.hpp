#pragma once

#include <array>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "sarfuse/core.hpp"

namespace sarfuse::evalx {

enum class Selector { AllPresent, MaskedOnly };

std::string_view selector_name(Selector s);
Selector selector_from_name(std::string_view name);

/// Steps scored against `truth`: observed ones, or only observed ones the mask hid.
std::vector<std::uint8_t> select_steps(const NdviSeries& truth, const CloudMask* mask, Selector selector);

/// Mean absolute error over the selected steps.
double mae(std::span<const double> pred, std::span<const double> truth, std::span<const std::uint8_t> selected);
double mae(std::span<const double> pred, const NdviSeries& truth, const CloudMask* mask, Selector selector);

/// 1 - SS_res / SS_tot over the selected steps.
double r_squared(std::span<const double> pred, std::span<const double> truth, std::span<const std::uint8_t> selected);
double r_squared(std::span<const double> pred, const NdviSeries& truth, const CloudMask* mask, Selector selector);

/// Pools (prediction, truth) pairs across series for MAE and R^2.
class ErrorPool {
 public:
  void add(double pred, double truth);
  void add(std::span<const double> pred, const NdviSeries& truth, std::span<const std::uint8_t> selected);
  std::size_t size() const { return pred_.size(); }
  double mae() const;
  double r_squared() const;

 private:
  std::vector<double> pred_;
  std::vector<double> truth_;
};

struct MatchResult {
  int true_positive = 0;
  int false_positive = 0;
  int false_negative = 0;
  std::vector<std::pair<int, int>> matched_pairs;  // (predicted doy, true doy)

  MatchResult& operator+=(const MatchResult& other);
};

/// Maximum one-to-one matching with |predicted - true| <= tolerance_days.
MatchResult match_events(std::span<const int> predicted, std::span<const int> truth, int tolerance_days = 12);

struct Prf {
  double recall = 1.0;
  double precision = 1.0;
  double f1 = 1.0;
};

Prf prf(const MatchResult& m);

struct CoverageBin {
  double lower = 0.0;  // inclusive
  double upper = 1.0;  // exclusive, except the last bin
  int parcels = 0;
  MatchResult match;
  Prf scores;
};

struct BinnedReport {
  double mu = 0.0;
  double sigma = 0.0;
  std::array<CoverageBin, 4> bins;
};

/// Bins at mu - sigma, mu, mu + sigma of the coverage sample (sigma floored at 1e-6).
BinnedReport binned_report(std::span<const MatchResult> per_parcel, std::span<const double> coverage);

}  // namespace sarfuse::evalx
