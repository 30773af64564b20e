#pragma once

// Shared numerical kernel: adaptive Gauss-Kronrod quadrature on finite and
// semi-infinite ranges, the special functions used by the density catalogue,
// grid helpers and monotone interpolation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <boost/math/special_functions/fpclassify.hpp>
#include <boost/math/interpolators/cubic_hermite.hpp>
#include <boost/math/interpolators/pchip.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace sphereshrink {

enum class NumericErrorKind {
  tolerance_not_reached,
  non_finite,
  divergence_suspected,
  domain,
};

inline const char* to_string(NumericErrorKind kind) {
  switch (kind) {
    case NumericErrorKind::tolerance_not_reached: return "tolerance-not-reached";
    case NumericErrorKind::non_finite: return "non-finite";
    case NumericErrorKind::divergence_suspected: return "divergence-suspected";
    case NumericErrorKind::domain: return "domain";
  }
  return "unknown";
}

class NumericError : public std::runtime_error {
 public:
  NumericError(NumericErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  [[nodiscard]] NumericErrorKind kind() const noexcept { return kind_; }

 private:
  NumericErrorKind kind_;
};

struct QuadratureSpec {
  double abs_tol = 1e-12;
  double rel_tol = 1e-10;
  int max_subdivisions = 2000;
  // Interior points where the integrand is kinked or singular. They become
  // subinterval boundaries and are never evaluated.
  std::vector<double> singularity_hints;

  void validate() const {
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0) || max_subdivisions < 1) {
      throw std::invalid_argument("QuadratureSpec: tolerances must be positive and max_subdivisions >= 1");
    }
  }

  [[nodiscard]] QuadratureSpec with_hints(std::vector<double> hints) const {
    QuadratureSpec copy = *this;
    copy.singularity_hints = std::move(hints);
    return copy;
  }

  [[nodiscard]] QuadratureSpec with_tolerance(double abs, double rel) const {
    QuadratureSpec copy = *this;
    copy.abs_tol = abs;
    copy.rel_tol = rel;
    return copy;
  }
};

struct IntegralResult {
  double value = 0.0;
  double error_estimate = 0.0;
  std::size_t evaluations = 0;
};

enum class TailDecay { exponential, power };

using RealFunction = std::function<double(double)>;

namespace detail {

struct Segment {
  double a;
  double b;
  double value;
  double error;
};

struct SegmentByError {
  bool operator()(const Segment& x, const Segment& y) const { return x.error < y.error; }
};

// One 21-point Kronrod panel with the QUADPACK error heuristic.
template <class F>
Segment kronrod21(F& f, double a, double b, std::size_t& evaluations) {
  using kronrod = boost::math::quadrature::gauss_kronrod<double, 21>;
  using gauss = boost::math::quadrature::gauss<double, 10>;
  const auto& x = kronrod::abscissa();
  const auto& wk = kronrod::weights();
  const auto& wg = gauss::weights();

  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);

  auto eval = [&](double t) {
    const double v = f(t);
    ++evaluations;
    if (!std::isfinite(v)) {
      std::ostringstream msg;
      msg << "integrand returned " << v << " at x = " << t;
      throw NumericError(NumericErrorKind::non_finite, msg.str());
    }
    return v;
  };

  std::array<double, 21> values{};
  values[0] = eval(center);
  for (std::size_t k = 1; k < x.size(); ++k) {
    values[2 * k - 1] = eval(center - half * x[k]);
    values[2 * k] = eval(center + half * x[k]);
  }

  double kronrod_sum = wk[0] * values[0];
  double gauss_sum = 0.0;
  double abs_sum = std::abs(kronrod_sum);
  for (std::size_t k = 1; k < x.size(); ++k) {
    const double pair = values[2 * k - 1] + values[2 * k];
    kronrod_sum += wk[k] * pair;
    abs_sum += wk[k] * (std::abs(values[2 * k - 1]) + std::abs(values[2 * k]));
    if (k % 2 == 1) gauss_sum += wg[k / 2] * pair;
  }
  const double mean = 0.5 * kronrod_sum;
  double asc = wk[0] * std::abs(values[0] - mean);
  for (std::size_t k = 1; k < x.size(); ++k) {
    asc += wk[k] * (std::abs(values[2 * k - 1] - mean) + std::abs(values[2 * k] - mean));
  }

  const double result = kronrod_sum * half;
  const double resabs = abs_sum * std::abs(half);
  const double resasc = asc * std::abs(half);
  double err = std::abs((kronrod_sum - gauss_sum) * half);
  if (resasc != 0.0 && err != 0.0) {
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  }
  constexpr double eps = std::numeric_limits<double>::epsilon();
  if (resabs > std::numeric_limits<double>::min() / (50.0 * eps)) {
    err = std::max(50.0 * eps * resabs, err);
  }
  return Segment{a, b, result, err};
}

}  // namespace detail

// Globally adaptive bisection driven by the largest local error estimate.
template <class F>
IntegralResult integrate(F&& f, double a, double b, const QuadratureSpec& spec = {}) {
  spec.validate();
  if (!(a <= b)) throw std::invalid_argument("integrate: requires a <= b");
  if (a == b) return {};

  std::vector<double> cuts{a};
  for (double h : spec.singularity_hints) {
    if (h > a && h < b) cuts.push_back(h);
  }
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::size_t evaluations = 0;
  std::priority_queue<detail::Segment, std::vector<detail::Segment>, detail::SegmentByError> active;
  std::vector<detail::Segment> frozen;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    active.push(detail::kronrod21(f, cuts[k], cuts[k + 1], evaluations));
  }

  auto totals = [&]() {
    double value = 0.0;
    double error = 0.0;
    auto copy = active;
    while (!copy.empty()) {
      value += copy.top().value;
      error += copy.top().error;
      copy.pop();
    }
    for (const auto& s : frozen) {
      value += s.value;
      error += s.error;
    }
    return std::pair{value, error};
  };

  auto [value, error] = totals();
  int subdivisions = 0;
  while (error > std::max(spec.abs_tol, spec.rel_tol * std::abs(value))) {
    if (active.empty() || subdivisions >= spec.max_subdivisions) {
      std::ostringstream msg;
      msg << "integral on [" << a << ", " << b << "] = " << value << " with error estimate " << error
          << " after " << subdivisions << " subdivisions";
      throw NumericError(NumericErrorKind::tolerance_not_reached, msg.str());
    }
    const detail::Segment worst = active.top();
    active.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b) ||
        (worst.b - worst.a) <= 64.0 * std::numeric_limits<double>::epsilon() *
                                   std::max(std::abs(worst.a), std::abs(worst.b))) {
      frozen.push_back(worst);
      continue;
    }
    const auto left = detail::kronrod21(f, worst.a, mid, evaluations);
    const auto right = detail::kronrod21(f, mid, worst.b, evaluations);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    active.push(left);
    active.push(right);
    ++subdivisions;
    if (subdivisions % 64 == 0) std::tie(value, error) = totals();
  }
  std::tie(value, error) = totals();
  return IntegralResult{value, error, evaluations};
}

// Integral over [a, inf). The caller declares the decay class of f; `scale`
// is the length scale of the decay (unit Gaussian: 1).
template <class F>
IntegralResult integrate_semi_infinite(F&& f, double a, TailDecay decay, const QuadratureSpec& spec = {},
                                       double scale = 1.0) {
  if (!(scale > 0.0)) throw std::invalid_argument("integrate_semi_infinite: scale must be positive");
  QuadratureSpec mapped = spec;
  mapped.singularity_hints.clear();
  // Infinity is mapped to t = 0+, where doubles are densest.
  for (double h : spec.singularity_hints) {
    if (h <= a) continue;
    const double t = decay == TailDecay::power ? scale / (h - a + scale) : std::exp(-(h - a) / scale);
    mapped.singularity_hints.push_back(t);
  }
  auto transformed = [&](double t) {
    if (decay == TailDecay::power) {
      const double r = a + scale * (1.0 / t - 1.0);
      return f(r) * scale / (t * t);
    }
    const double r = a - scale * std::log(t);
    return f(r) * scale / t;
  };
  try {
    return integrate(transformed, 0.0, 1.0, mapped);
  } catch (const NumericError& e) {
    throw NumericError(NumericErrorKind::divergence_suspected,
                       std::string("semi-infinite integral did not settle: ") + e.what());
  }
}

inline double log_gamma(double x) {
  if (!(x > 0.0)) throw NumericError(NumericErrorKind::domain, "log_gamma requires x > 0");
  return boost::math::lgamma(x);
}

inline double beta_fn(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw NumericError(NumericErrorKind::domain, "beta_fn requires a, b > 0");
  return boost::math::beta(a, b);
}

// Non-normalised upper incomplete gamma, Gamma(s, x).
inline double upper_incomplete_gamma(double s, double x) {
  if (!(s > 0.0) || !(x >= 0.0)) {
    throw NumericError(NumericErrorKind::domain, "upper_incomplete_gamma requires s > 0 and x >= 0");
  }
  return boost::math::tgamma(s, x);
}

// Surface area of the unit sphere in R^p, 2 pi^{p/2} / Gamma(p/2).
inline double sphere_surface(double p) {
  if (!(p > 0.0)) throw NumericError(NumericErrorKind::domain, "sphere_surface requires p > 0");
  return 2.0 * std::pow(std::numbers::pi, 0.5 * p) / boost::math::tgamma(0.5 * p);
}

inline double log_sphere_surface(double p) {
  return std::log(2.0) + 0.5 * p * std::log(std::numbers::pi) - log_gamma(0.5 * p);
}

// Geometric grid from lo to hi (inclusive) with the given density per decade.
inline std::vector<double> geometric_grid(double lo, double hi, int per_decade) {
  if (!(lo > 0.0) || !(hi > lo) || per_decade < 1) {
    throw std::invalid_argument("geometric_grid: need 0 < lo < hi and per_decade >= 1");
  }
  const double decades = std::log10(hi / lo);
  const auto steps = static_cast<std::size_t>(std::ceil(decades * per_decade - 1e-9));
  std::vector<double> grid(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    grid[k] = lo * std::pow(10.0, decades * static_cast<double>(k) / static_cast<double>(steps));
  }
  grid.back() = hi;
  return grid;
}

// Copyable monotone piecewise-cubic interpolant (Fritsch-Carlson / PCHIP).
class MonotoneCubic {
 public:
  MonotoneCubic() = default;

  MonotoneCubic(std::vector<double> x, std::vector<double> y) {
    if (x.size() != y.size() || x.size() < 4) {
      throw std::invalid_argument("MonotoneCubic: need at least four matching abscissas and ordinates");
    }
    lo_ = x.front();
    hi_ = x.back();
    impl_ = std::make_shared<const boost::math::interpolators::pchip<std::vector<double>>>(std::move(x),
                                                                                          std::move(y));
  }

  [[nodiscard]] double operator()(double x) const { return (*impl_)(std::clamp(x, lo_, hi_)); }
  [[nodiscard]] double prime(double x) const { return impl_->prime(std::clamp(x, lo_, hi_)); }
  [[nodiscard]] double lower() const { return lo_; }
  [[nodiscard]] double upper() const { return hi_; }
  [[nodiscard]] bool empty() const { return !impl_; }

 private:
  std::shared_ptr<const boost::math::interpolators::pchip<std::vector<double>>> impl_;
  double lo_ = 0.0;
  double hi_ = 0.0;
};

// Least-squares slope of y against x.
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_slope: need two or more points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
  }
  return sxy / sxx;
}

// log(exp(a) + exp(b)) without overflow.
inline double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace sphereshrink
