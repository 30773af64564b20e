#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "sphereshrink/numerics.hpp"
#include "sphereshrink/radial_models.hpp"

namespace sphereshrink {

struct IdentityCheck {
  std::string id;
  std::map<std::string, double> params;
  double lhs = 0.0;
  double rhs = 0.0;
  double rel_error = 0.0;
};

inline IdentityCheck make_check(std::string id, std::map<std::string, double> params, double lhs, double rhs) {
  return {std::move(id), std::move(params), lhs, rhs, std::abs(lhs - rhs) / std::max(std::abs(rhs), 1e-300)};
}

// Largest |a| accepted by the Gegenbauer check; the integrand sharpens as |a| -> 1.
inline constexpr double kGegenbauerMaxA = 0.99;

// int_0^pi (1 + 2a cos phi + a^2)^{-alpha} sin^{2 alpha} phi d phi = B(alpha + 1/2, 1/2)
inline IdentityCheck gegenbauer_identity(double alpha, double a) {
  if (!(alpha > -0.5)) throw NumericError(NumericErrorKind::domain, "gegenbauer identity needs alpha > -1/2");
  if (!(std::abs(a) <= kGegenbauerMaxA)) {
    throw NumericError(NumericErrorKind::domain, "gegenbauer identity is checked for |a| <= 0.99");
  }
  const double pi = std::acos(-1.0);
  auto integrand = [&](double phi) {
    const double base = (1.0 - a) * (1.0 - a) + 4.0 * a * std::pow(std::cos(0.5 * phi), 2);
    const double s = std::sin(phi);
    return std::exp(-alpha * std::log(base) + 2.0 * alpha * std::log(s));
  };
  double lhs = 0.0;
  if (alpha >= 0.0) {
    lhs = integrate(integrand, 0.0, pi, QuadratureSpec{1e-300, 1e-12, 4000, {0.5 * pi}}).value;
  } else {
    // phi = u^q at each endpoint removes the sin^{2 alpha} singularity
    const double q = 1.0 / (1.0 + 2.0 * alpha);
    const double top = std::pow(0.5 * pi, 1.0 / q);
    const QuadratureSpec spec{1e-300, 1e-12, 4000, {}};
    // with d = |phi - origin| = u^q, sin^{2 alpha}(phi) q u^{q-1} = q (sin(phi) / d)^{2 alpha}
    auto near = [&](double sign, double origin) {
      return integrate(
                 [&](double u) {
                   const double d = std::pow(u, q);
                   const double phi = origin + sign * d;
                   const double base = (1.0 - a) * (1.0 - a) + 4.0 * a * std::pow(std::cos(0.5 * phi), 2);
                   const double ratio = d > 0.0 ? std::sin(d) / d : 1.0;
                   return q * std::exp(-alpha * std::log(base) + 2.0 * alpha * std::log(ratio));
                 },
                 0.0, top, spec)
          .value;
    };
    lhs = near(1.0, 0.0) + near(-1.0, pi);
  }
  return make_check("gegenbauer", {{"alpha", alpha}, {"a", a}}, lhs, beta_fn(alpha + 0.5, 0.5));
}

// int_0^pi (1 + 2t cos phi + t^2)^{1-p/2} sin^{p-2} phi d phi = B(p/2 - 1/2, 1/2) min(t^{2-p}, 1)
inline IdentityCheck min_power_identity(int p, double t) {
  if (p < 3) throw NumericError(NumericErrorKind::domain, "min-power identity needs p >= 3");
  if (!(t > 0.0)) throw NumericError(NumericErrorKind::domain, "min-power identity needs t > 0");
  const double pi = std::acos(-1.0);
  const double e = 1.0 - 0.5 * p;
  auto integrand = [&](double phi) {
    // 1 + 2t cos phi + t^2 = (1 - t)^2 + 4t cos^2(phi/2), exact near phi = pi
    const double c = std::cos(0.5 * phi);
    const double base = (1.0 - t) * (1.0 - t) + 4.0 * t * c * c;
    const double s = std::sin(phi);
    if (!(s > 0.0) || !(base > 0.0)) return (t == 1.0 && phi > 0.5 * pi) ? 1.0 : 0.0;
    return std::exp(e * std::log(base) + (p - 2.0) * std::log(s));
  };
  QuadratureSpec spec{1e-300, 1e-12, 4000, {0.5 * pi}};
  if (std::abs(t - 1.0) < 0.05) spec.singularity_hints.push_back(pi - std::max(std::abs(t - 1.0), 1e-6));
  const double lhs = integrate(integrand, 0.0, pi, spec).value;
  const double rhs = beta_fn(0.5 * p - 0.5, 0.5) * std::min(std::pow(t, 2.0 - p), 1.0);
  return make_check("min_power", {{"p", static_cast<double>(p)}, {"t", t}}, lhs, rhs);
}

// int_{R^p} |y|^alpha F(|y|) dy = c_p / (p + alpha) int_0^inf z^{p+1+alpha} f(z) dz
inline IdentityCheck kernel_mass_identity(const RadialDensity& model, double alpha) {
  const int p = model.dimension();
  if (!(p + alpha > 0.0)) throw NumericError(NumericErrorKind::domain, "kernel mass identity needs p + alpha > 0");
  if (!model.moment_converges(alpha + 2.0)) {
    throw NumericError(NumericErrorKind::divergence_suspected, "kernel mass identity: divergent moment");
  }
  const double cp = sphere_surface(p);
  std::vector<double> cuts;
  for (double c = model.scale(); c < 64.0 * model.scale(); c *= 2.0) cuts.push_back(c);
  QuadratureSpec spec{1e-300, 1e-12, 4000, cuts};
  const double head = integrate([&](double r) { return std::pow(r, p - 1.0 + alpha) * model.big_f(r); }, 0.0,
                                64.0 * model.scale(), spec)
                          .value;
  const double tail = integrate_semi_infinite([&](double r) { return std::pow(r, p - 1.0 + alpha) * model.big_f(r); },
                                              64.0 * model.scale(), model.tail_decay(),
                                              QuadratureSpec{1e-300, 1e-12, 2000, {}}, model.scale())
                          .value;
  const double lhs = cp * (head + tail);
  // c_p int z^{p+1+alpha} f = E_0|X|^{alpha+2}
  const double rhs = model.moment(alpha + 2.0) / (p + alpha);
  return make_check("kernel_mass:" + model.id(), {{"alpha", alpha}, {"p", static_cast<double>(p)}}, lhs, rhs);
}

// Largest pairwise relative spread of the Gegenbauer left-hand side over a sweep in a.
inline double gegenbauer_spread(double alpha, const std::vector<double>& a_values) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double a : a_values) {
    const double v = gegenbauer_identity(alpha, a).lhs;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return (hi - lo) / std::abs(lo);
}

}  // namespace sphereshrink
