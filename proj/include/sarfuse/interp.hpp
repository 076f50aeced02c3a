#pragma once

#include <string_view>
#include <vector>

#include "sarfuse/core.hpp"

namespace sarfuse::interp {

/// Present observations as (day-of-year, value) pairs, strictly increasing in x.
struct Knots {
  std::vector<double> x;
  std::vector<double> y;

  static Knots from_series(const NdviSeries& series, const TemporalGrid& grid);
  std::size_t size() const { return x.size(); }
  void validate(std::size_t min_count, std::string_view method) const;
};

/// Piecewise-linear interpolant; constant beyond the first and last knot.
class LinearInterpolant {
 public:
  explicit LinearInterpolant(Knots knots);
  double operator()(double x) const;

 private:
  Knots knots_;
};

/// Akima (1970) piecewise cubic. Interior node slopes use the weighted average of
/// neighbouring secant slopes; two extra secants are linearly extrapolated at each
/// end. Constant beyond the support.
class AkimaSpline {
 public:
  explicit AkimaSpline(Knots knots);
  double operator()(double x) const;
  const std::vector<double>& node_slopes() const { return slopes_; }

 private:
  Knots knots_;
  std::vector<double> slopes_;
};

/// Interpolating C1 quadratic spline. Breakpoints sit at the midpoints between
/// consecutive knots, dropping the first and last midpoint so the collocation
/// system is square (the convention of scipy's make_interp_spline with k=2).
/// Constant beyond the support.
class QuadraticSpline {
 public:
  explicit QuadraticSpline(Knots knots);
  double operator()(double x) const;

 private:
  Knots knots_;
  std::vector<double> t_;     // B-spline knot vector, size n + 3
  std::vector<double> coef_;  // n coefficients
};

enum class Method { Linear, Akima, Quadratic };

std::string_view method_name(Method m);
Method method_from_name(std::string_view name);
std::size_t min_knots(Method m);

/// Evaluates the chosen interpolant on every grid step. Present steps keep their
/// observed value. Throws ValidationError when there are too few observations.
std::vector<double> fill(const NdviSeries& series, const TemporalGrid& grid, Method method);

std::vector<double> fill_linear(const NdviSeries& series, const TemporalGrid& grid);
std::vector<double> fill_akima(const NdviSeries& series, const TemporalGrid& grid);
std::vector<double> fill_quadratic(const NdviSeries& series, const TemporalGrid& grid);

}  // namespace sarfuse::interp
