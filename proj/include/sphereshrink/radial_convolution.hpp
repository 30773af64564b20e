#pragma once

// Convolutions of radial functions against radial kernels in R^p, reduced to
// an outer radius integral and an inner angular integral.

#include <cmath>
#include <numbers>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sphereshrink/numerics.hpp"
#include "sphereshrink/radial_models.hpp"
#include "sphereshrink/rv_priors.hpp"

namespace sphereshrink {

enum class KernelKind { density, tail_kernel };

struct ConvolutionProblem {
  int p = 3;
  KernelKind kernel = KernelKind::density;
  std::function<double(double)> integrand;  // rho(|theta|)
  double r = 0.0;                           // |x|
  // rho(s) ~ s^{singularity_power} as s -> 0
  double singularity_power = 0.0;
  // weight the integrand by the component of theta along x, divided by |x|
  bool projected = false;
};

// C_f = pi^{p/2} / Gamma(p/2 + 1) int_0^inf z^{p+1} f(z) dz = E_0|X|^2 / p
inline double c_f(const RadialDensity& model) {
  if (!model.moment_converges(2.0)) {
    throw NumericError(NumericErrorKind::divergence_suspected, "C_f needs a finite second moment");
  }
  return model.moment(2.0) / model.dimension();
}

namespace detail {

// int_{-1}^{1} rho(s(u)) (1-u^2)^{(p-3)/2} m(u) du with s^2 = r^2 + l^2 + 2 r l u,
// m = 1 or (r + l u) / r.
template <class Rho>
double angular_integral(const Rho& rho, double r, double l, int p, bool projected, const QuadratureSpec& spec) {
  const double jacobi = 0.5 * (p - 3);
  const double big = std::max(r, l);
  const double small = std::min(r, l);
  if (small == 0.0) {
    return rho(big) * beta_fn(0.5 * (p - 1), 0.5);
  }
  if (small < 0.25 * big) {
    // s stays away from 0: integrate in phi with u = cos phi, where the weight sin^{p-2} phi is smooth.
    // The projected factor 1 + l u / r is large for l >> r; its odd part integrates rho(s) - rho(s0)
    // (s0 = s at u = 0, whose odd moment vanishes) to avoid cancellation.
    const double rho0 = projected ? rho(std::sqrt(r * r + l * l)) : 0.0;
    auto in_phi = [&](double phi) {
      const double u = std::cos(phi);
      const double s = std::sqrt(std::max(0.0, r * r + l * l + 2.0 * r * l * u));
      const double w = std::pow(std::sin(phi), p - 2.0);
      const double v = rho(s);
      if (projected) return (v + (v - rho0) * (l * u / r)) * w;
      return v * w;
    };
    return integrate(in_phi, 0.0, std::numbers::pi, spec).value;
  }
  // ridge zone: integrate in s on [|r-l|, r+l] with du = s ds / (r l)
  const double lo = std::abs(r - l);
  const double hi = r + l;
  const double rl2 = 2.0 * r * l;
  auto in_s = [&](double s) {
    if (s <= 0.0) return 0.0;
    double w = s / (r * l);
    if (jacobi != 0.0) {
      const double one_plus = (s - lo) * (s + lo) / rl2;
      const double one_minus = (hi - s) * (hi + s) / rl2;
      w *= std::pow(std::max(0.0, one_plus * one_minus), jacobi);
    }
    if (projected) w *= (s * s + r * r - l * l) / (2.0 * r * r);
    return rho(s) * w;
  };
  return integrate(in_s, lo, hi, spec).value;
}

}  // namespace detail

// int_{R^p} rho(|theta|) w(|theta - x|) d theta for w = f or F / C_f.
inline double radial_expectation(const ConvolutionProblem& problem, const RadialDensity& model,
                                 const QuadratureSpec& outer_spec = QuadratureSpec{1e-300, 1e-10, 4000, {}},
                                 const QuadratureSpec& inner_spec = QuadratureSpec{1e-300, 1e-12, 4000, {}}) {
  const int p = problem.p;
  if (p != model.dimension()) throw std::invalid_argument("convolution dimension differs from the model's");
  if (!(problem.r >= 0.0)) throw std::invalid_argument("radius must be nonnegative");
  const double cf = problem.kernel == KernelKind::tail_kernel ? c_f(model) : 1.0;
  const double log_surface = log_sphere_surface(p - 1.0);
  auto log_weight = [&](double l) {
    return problem.kernel == KernelKind::density ? model.log_density(l) : model.log_big_f(l) - std::log(cf);
  };
  const double r = problem.r;
  auto outer = [&](double l) {
    if (l == 0.0) return 0.0;
    const double lw = log_weight(l) + (p - 1.0) * std::log(l) + log_surface;
    if (lw < -745.0) return 0.0;
    const double inner = detail::angular_integral(problem.integrand, r, l, p, problem.projected, inner_spec);
    return std::exp(lw) * inner;
  };
  const double sigma = model.scale();
  const double reach = model.effective_radius(1e-18);
  std::vector<double> cuts;
  for (double b = sigma; b < reach; b *= 2.0) cuts.push_back(b);
  if (r > 0.0 && r < reach) cuts.push_back(r);
  const QuadratureSpec head = outer_spec.with_hints(cuts);
  double total = integrate(outer, 0.0, reach, head).value;
  QuadratureSpec tail = outer_spec;
  if (r > reach) tail.singularity_hints = {r};
  total += integrate_semi_infinite(outer, reach, model.tail_decay(), tail, sigma).value;
  return total;
}

// 1 - m(g|x)/g(x) for the harmonic prior, c_p (p-2) int_r^inf t^{p-3} F(t) dt,
// returned as a logarithm so that deficits far below the double range survive.
inline double harmonic_log_deficit(const RadialDensity& model, double r) {
  const int p = model.dimension();
  const double log_fr = model.log_big_f(r);
  auto scaled = [&](double t) {
    return std::pow(t / std::max(r, 1e-300), p - 3.0) * std::exp(model.log_big_f(t) - log_fr);
  };
  const QuadratureSpec spec{1e-300, 1e-10, 2000, {}};
  const double tail = integrate_semi_infinite(scaled, r, model.tail_decay(), spec, model.scale()).value;
  const double log_rp = r > 0.0 ? (p - 3.0) * std::log(r) : 0.0;
  return log_sphere_surface(p) + std::log(p - 2.0) + log_fr + log_rp + std::log(tail);
}

// m(g|x) for the harmonic prior: c_p (p-2) int_0^1 t^{p-3} F(r t) dt
inline double harmonic_marginal(const RadialDensity& model, double r) {
  const int p = model.dimension();
  if (r == 0.0) return sphere_surface(p) * model.big_f0();
  const double reach = model.effective_radius(1e-18);
  auto integrand = [&](double t) { return std::pow(t, p - 3.0) * model.big_f(r * t); };
  QuadratureSpec spec{1e-300, 1e-11, 4000, {}};
  if (r > reach) spec.singularity_hints = {reach / r};
  return sphere_surface(p) * (p - 2.0) * integrate(integrand, 0.0, 1.0, spec).value;
}

inline ConvolutionProblem prior_problem(const RadialPrior& prior, double r, KernelKind kernel, bool projected = false) {
  if (!prior.euclidean()) {
    throw std::invalid_argument("convolution probes require the Euclidean norm (all norm weights equal to 1)");
  }
  ConvolutionProblem problem;
  problem.p = prior.dimension();
  problem.kernel = kernel;
  problem.r = r;
  problem.projected = projected;
  problem.singularity_power = prior.log_deriv(1e-8);
  problem.integrand = [prior](double s) { return prior.value(s); };
  return problem;
}

// m(g|x) = int g(theta) f(|theta - x|) d theta
inline double marginal_m(const RadialPrior& prior, const RadialDensity& model, double r, bool check_fg1 = true) {
  if (check_fg1 && !fg1_check(prior, model)) {
    throw NumericError(NumericErrorKind::divergence_suspected, "FG1 integrability fails for " + prior.id());
  }
  if (prior.is_harmonic() && prior.euclidean() && r > 0.0) return harmonic_marginal(model, r);
  return radial_expectation(prior_problem(prior, r, KernelKind::density), model);
}

// M(rho|x) = (1/C_f) int rho(|theta|) F(|theta - x|) d theta
inline double kernel_marginal_M(std::function<double(double)> rho, const RadialDensity& model, double r,
                                double singularity_power = 0.0) {
  ConvolutionProblem problem;
  problem.p = model.dimension();
  problem.kernel = KernelKind::tail_kernel;
  problem.integrand = std::move(rho);
  problem.r = r;
  problem.singularity_power = singularity_power;
  return radial_expectation(problem, model);
}

struct RatioRow {
  double r = 0.0;
  double m_ratio = 1.0;         // m(g|x) / g(x)
  double M_ratio = 1.0;         // M(g|x) / g(x)
  double M_inv_ratio = 1.0;     // M(g/|theta| | x) / (g(x)/r)
  // log |ratio - 1|, -inf when the deviation is exactly zero
  double m_log_dev = 0.0;
  double M_log_dev = 0.0;
  double M_inv_log_dev = 0.0;
};

struct RatioProbe {
  std::vector<RatioRow> rows;
  // fitted exponents e in |ratio - 1| ~ r^{-e} (NaN when fewer than two finite deviations)
  double m_exponent = std::numeric_limits<double>::quiet_NaN();
  double M_exponent = std::numeric_limits<double>::quiet_NaN();
  double M_inv_exponent = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline double log_abs_dev(double ratio) {
  const double d = std::abs(ratio - 1.0);
  return d > 0.0 ? std::log(d) : -std::numeric_limits<double>::infinity();
}

inline double fitted_exponent(const std::vector<RatioRow>& rows, double RatioRow::*field) {
  std::vector<double> x, y;
  for (const auto& row : rows) {
    const double v = row.*field;
    if (std::isfinite(v) && row.r > 0.0) {
      x.push_back(std::log(row.r));
      y.push_back(v);
    }
  }
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  return -fit_slope(x, y);
}

}  // namespace detail

// Asymptotic ratios m/g, M(g)/g and M(g/|theta|)/(g/r) along r_list. For the
// harmonic prior the first two deviations come from their tail integrals
//   1 - m/g = c_p (p-2) int_r^inf t^{p-3} F(t) dt,
//   1 - M/g = (c_p / C_f) int_r^inf t F(t) (t^{p-2} - r^{p-2}) dt.
inline RatioProbe asymptotic_ratio_probe(const RadialPrior& prior, const RadialDensity& model,
                                         const std::vector<double>& r_list) {
  const int p = prior.dimension();
  if (p != model.dimension()) throw std::invalid_argument("prior and model dimensions differ");
  RatioProbe probe;
  const bool harmonic = prior.is_harmonic() && prior.euclidean();
  const double cf = c_f(model);
  for (double r : r_list) {
    if (!(r > 0.0)) throw std::invalid_argument("probe radii must be positive");
    RatioRow row;
    row.r = r;
    const double g = prior.value(r);
    if (prior.is_flat()) {
      row.m_ratio = row.M_ratio = 1.0;
      row.m_log_dev = row.M_log_dev = -std::numeric_limits<double>::infinity();
    } else if (harmonic) {
      row.m_log_dev = harmonic_log_deficit(model, r);
      row.m_ratio = 1.0 - std::exp(row.m_log_dev);
      // second-order tail of F in the log domain
      const double log_fr = model.log_big_f(r);
      auto scaled = [&](double t) {
        return t * std::exp(model.log_big_f(t) - log_fr) * (std::pow(t / r, p - 2.0) - 1.0);
      };
      const QuadratureSpec spec{1e-300, 1e-10, 2000, {}};
      const double tail = integrate_semi_infinite(scaled, r, model.tail_decay(), spec, model.scale()).value;
      row.M_log_dev = tail > 0.0 ? log_sphere_surface(p) - std::log(cf) + log_fr + (p - 2.0) * std::log(r) +
                                       std::log(tail)
                                 : -std::numeric_limits<double>::infinity();
      row.M_ratio = 1.0 - std::exp(row.M_log_dev);
    } else {
      row.m_ratio = radial_expectation(prior_problem(prior, r, KernelKind::density), model) / g;
      row.M_ratio = radial_expectation(prior_problem(prior, r, KernelKind::tail_kernel), model) / g;
      row.m_log_dev = detail::log_abs_dev(row.m_ratio);
      row.M_log_dev = detail::log_abs_dev(row.M_ratio);
    }
    ConvolutionProblem inv = prior_problem(prior, r, KernelKind::tail_kernel);
    inv.integrand = [prior](double s) { return prior.value(s) / s; };
    inv.singularity_power -= 1.0;
    row.M_inv_ratio = radial_expectation(inv, model) / (g / r);
    row.M_inv_log_dev = detail::log_abs_dev(row.M_inv_ratio);
    probe.rows.push_back(row);
  }
  probe.m_exponent = detail::fitted_exponent(probe.rows, &RatioRow::m_log_dev);
  probe.M_exponent = detail::fitted_exponent(probe.rows, &RatioRow::M_log_dev);
  probe.M_inv_exponent = detail::fitted_exponent(probe.rows, &RatioRow::M_inv_log_dev);
  return probe;
}

}  // namespace sphereshrink
