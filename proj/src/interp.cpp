#include "sarfuse/interp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sarfuse/error.hpp"

namespace sarfuse::interp {

Knots Knots::from_series(const NdviSeries& series, const TemporalGrid& grid) {
  if (series.size() != static_cast<std::size_t>(grid.length)) {
    throw ValidationError("series length does not match grid length");
  }
  Knots k;
  for (int t = 0; t < grid.length; ++t) {
    if (series[t]) {
      k.x.push_back(static_cast<double>(grid.doy(t)));
      k.y.push_back(*series[t]);
    }
  }
  return k;
}

void Knots::validate(std::size_t min_count, std::string_view method) const {
  if (x.size() != y.size()) throw ValidationError("knot arrays differ in length");
  if (x.size() < min_count) {
    throw ValidationError(std::string(method) + " interpolation needs at least " + std::to_string(min_count) +
                          " observations, got " + std::to_string(x.size()));
  }
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (!(x[i] > x[i - 1])) throw ValidationError("knots must be strictly increasing");
  }
}

namespace {

// Index i with x[i] <= q < x[i+1], assuming x[0] <= q < x.back().
std::size_t interval_of(const std::vector<double>& x, double q) {
  auto it = std::upper_bound(x.begin(), x.end(), q);
  return static_cast<std::size_t>(std::distance(x.begin(), it)) - 1;
}

}  // namespace

LinearInterpolant::LinearInterpolant(Knots knots) : knots_(std::move(knots)) { knots_.validate(2, "linear"); }

double LinearInterpolant::operator()(double q) const {
  const auto& x = knots_.x;
  const auto& y = knots_.y;
  if (q <= x.front()) return y.front();
  if (q >= x.back()) return y.back();
  const std::size_t i = interval_of(x, q);
  const double w = (q - x[i]) / (x[i + 1] - x[i]);
  return y[i] + w * (y[i + 1] - y[i]);
}

AkimaSpline::AkimaSpline(Knots knots) : knots_(std::move(knots)) {
  knots_.validate(5, "akima");
  const auto& x = knots_.x;
  const auto& y = knots_.y;
  const std::size_t n = x.size();
  // m[k + 2] holds the secant slope of interval k, k = -2 .. n.
  std::vector<double> m(n + 3);
  for (std::size_t k = 0; k + 1 < n; ++k) m[k + 2] = (y[k + 1] - y[k]) / (x[k + 1] - x[k]);
  m[1] = 2.0 * m[2] - m[3];
  m[0] = 2.0 * m[1] - m[2];
  m[n + 1] = 2.0 * m[n] - m[n - 1];
  m[n + 2] = 2.0 * m[n + 1] - m[n];
  slopes_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w_left = std::abs(m[i + 3] - m[i + 2]);
    const double w_right = std::abs(m[i + 1] - m[i]);
    const double denom = w_left + w_right;
    slopes_[i] = denom > 0.0 ? (w_left * m[i + 1] + w_right * m[i + 2]) / denom : 0.5 * (m[i + 1] + m[i + 2]);
  }
}

double AkimaSpline::operator()(double q) const {
  const auto& x = knots_.x;
  const auto& y = knots_.y;
  if (q <= x.front()) return y.front();
  if (q >= x.back()) return y.back();
  const std::size_t i = interval_of(x, q);
  const double h = x[i + 1] - x[i];
  const double s = (q - x[i]) / h;
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1;
  const double h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2;
  const double h11 = s3 - s2;
  return h00 * y[i] + h10 * h * slopes_[i] + h01 * y[i + 1] + h11 * h * slopes_[i + 1];
}

namespace {

// Non-zero degree-2 B-spline values at q for the span `mu` (t[mu] <= q < t[mu+1]).
std::array<double, 3> quadratic_basis(const std::vector<double>& t, std::size_t mu, double q) {
  std::array<double, 3> n{1.0, 0.0, 0.0};
  std::array<double, 3> left{};
  std::array<double, 3> right{};
  for (std::size_t j = 1; j <= 2; ++j) {
    left[j] = q - t[mu + 1 - j];
    right[j] = t[mu + j] - q;
    double saved = 0.0;
    for (std::size_t r = 0; r < j; ++r) {
      const double tmp = n[r] / (right[r + 1] + left[j - r]);
      n[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    n[j] = saved;
  }
  return n;
}

std::size_t find_span(const std::vector<double>& t, std::size_t n_basis, double q) {
  // Valid spans are 2 .. n_basis - 1; the right end belongs to the last span.
  if (q >= t[n_basis]) return n_basis - 1;
  auto it = std::upper_bound(t.begin() + 2, t.begin() + static_cast<std::ptrdiff_t>(n_basis) + 1, q);
  return static_cast<std::size_t>(std::distance(t.begin(), it)) - 1;
}

// Dense Gaussian elimination with partial pivoting; a is n x n row-major.
std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    }
    if (a[piv * n + col] == 0.0) throw ValidationError("singular spline collocation system");
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[piv * n + c], a[col * n + c]);
      std::swap(b[piv], b[col]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / a[col * n + col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i * n + c] * x[c];
    x[i] = s / a[i * n + i];
  }
  return x;
}

}  // namespace

QuadraticSpline::QuadraticSpline(Knots knots) : knots_(std::move(knots)) {
  knots_.validate(3, "quadratic");
  const auto& x = knots_.x;
  const std::size_t n = x.size();
  t_.reserve(n + 3);
  t_.insert(t_.end(), 3, x.front());
  for (std::size_t i = 1; i + 2 < n; ++i) t_.push_back(0.5 * (x[i] + x[i + 1]));
  t_.insert(t_.end(), 3, x.back());

  std::vector<double> a(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t mu = find_span(t_, n, x[i]);
    const auto basis = quadratic_basis(t_, mu, x[i]);
    for (std::size_t r = 0; r < 3; ++r) a[i * n + (mu - 2 + r)] = basis[r];
  }
  coef_ = solve_dense(std::move(a), knots_.y);
}

double QuadraticSpline::operator()(double q) const {
  const auto& x = knots_.x;
  if (q <= x.front()) return knots_.y.front();
  if (q >= x.back()) return knots_.y.back();
  const std::size_t n = x.size();
  const std::size_t mu = find_span(t_, n, q);
  const auto basis = quadratic_basis(t_, mu, q);
  return basis[0] * coef_[mu - 2] + basis[1] * coef_[mu - 1] + basis[2] * coef_[mu];
}

std::string_view method_name(Method m) {
  switch (m) {
    case Method::Linear: return "linear";
    case Method::Akima: return "akima";
    case Method::Quadratic: return "quadratic";
  }
  return "unknown";
}

Method method_from_name(std::string_view name) {
  if (name == "linear") return Method::Linear;
  if (name == "akima") return Method::Akima;
  if (name == "quadratic") return Method::Quadratic;
  throw ValidationError("unknown interpolation method '" + std::string(name) + "'");
}

std::size_t min_knots(Method m) {
  switch (m) {
    case Method::Linear: return 2;
    case Method::Akima: return 5;
    case Method::Quadratic: return 3;
  }
  return 2;
}

namespace {
template <class Interpolant>
std::vector<double> fill_with(const NdviSeries& series, const TemporalGrid& grid) {
  Knots knots = Knots::from_series(series, grid);
  const Interpolant f(std::move(knots));
  std::vector<double> out(series.size());
  for (int t = 0; t < grid.length; ++t) out[t] = series[t] ? *series[t] : f(static_cast<double>(grid.doy(t)));
  return out;
}
}  // namespace

std::vector<double> fill(const NdviSeries& series, const TemporalGrid& grid, Method method) {
  switch (method) {
    case Method::Linear: return fill_with<LinearInterpolant>(series, grid);
    case Method::Akima: return fill_with<AkimaSpline>(series, grid);
    case Method::Quadratic: return fill_with<QuadraticSpline>(series, grid);
  }
  throw ValidationError("unknown interpolation method");
}

std::vector<double> fill_linear(const NdviSeries& s, const TemporalGrid& g) { return fill(s, g, Method::Linear); }
std::vector<double> fill_akima(const NdviSeries& s, const TemporalGrid& g) { return fill(s, g, Method::Akima); }
std::vector<double> fill_quadratic(const NdviSeries& s, const TemporalGrid& g) {
  return fill(s, g, Method::Quadratic);
}

}  // namespace sarfuse::interp
