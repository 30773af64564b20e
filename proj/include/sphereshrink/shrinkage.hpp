#pragma once

// The harmonic-prior generalized Bayes estimator
//   delta*(x) = (1 - phi*(|x|) / |x|^2) x,
//   phi*(r)   = int_0^r t^{p-1} F(t) dt / int_0^r t^{p-3} F(t) dt,
// its tabulated profile, and the posterior-mean multiplier for other priors.

#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "sphereshrink/numerics.hpp"
#include "sphereshrink/radial_convolution.hpp"
#include "sphereshrink/radial_models.hpp"
#include "sphereshrink/rv_priors.hpp"

namespace sphereshrink {

namespace detail {

// int_a^b t^k F(t) dt with breakpoints on the model's length scale.
inline double f_moment_between(const RadialDensity& model, double k, double a, double b) {
  if (!(b > a)) return 0.0;
  std::vector<double> cuts;
  for (double c = model.scale(); c < b; c *= 2.0) {
    if (c > a) cuts.push_back(c);
  }
  const QuadratureSpec spec{1e-300, 1e-12, 4000, cuts};
  return integrate([&](double t) { return std::pow(t, k) * model.big_f(t); }, a, b, spec).value;
}

}  // namespace detail

inline double phi_star(const RadialDensity& model, double r) {
  if (!(r > 0.0)) throw NumericError(NumericErrorKind::domain, "phi_star requires r > 0");
  const int p = model.dimension();
  const double num = detail::f_moment_between(model, p - 1.0, 0.0, r);
  const double den = detail::f_moment_between(model, p - 3.0, 0.0, r);
  return num / den;
}

// r^2 int_0^1 t^{p-1} F(rt) dt / int_0^1 t^{p-3} F(rt) dt
inline double phi_star_rescaled(const RadialDensity& model, double r) {
  if (!(r > 0.0)) throw NumericError(NumericErrorKind::domain, "phi_star requires r > 0");
  const int p = model.dimension();
  std::vector<double> cuts;
  for (double c = model.scale(); c < r; c *= 2.0) cuts.push_back(c / r);
  const QuadratureSpec spec{1e-300, 1e-12, 4000, cuts};
  const double num = integrate([&](double t) { return std::pow(t, p - 1.0) * model.big_f(r * t); }, 0.0, 1.0, spec).value;
  const double den = integrate([&](double t) { return std::pow(t, p - 3.0) * model.big_f(r * t); }, 0.0, 1.0, spec).value;
  return r * r * num / den;
}

// (p-2) E_0|X|^2 / p
inline double phi_limit(const RadialDensity& model) {
  const int p = model.dimension();
  if (!model.moment_converges(2.0)) {
    throw NumericError(NumericErrorKind::divergence_suspected, "phi limit needs a finite second moment");
  }
  return (p - 2.0) * model.moment(2.0) / p;
}

// Radius beyond which the model carries no mass: F(R) <= 1e-10 F(0).
inline double r_max(const RadialDensity& model) { return model.effective_radius(1e-10); }

// Tabulated radial multiplier kappa(r), delta(x) = kappa(|x|) x. Interpolation
// is a monotone cubic in (log r, value); outside the table `fallback` is called.
class MultiplierProfile {
 public:
  MultiplierProfile() = default;

  MultiplierProfile(std::vector<double> r, std::vector<double> kappa, std::function<double(double)> fallback)
      : r_(std::move(r)), kappa_(std::move(kappa)), fallback_(std::move(fallback)) {
    std::vector<double> lr(r_.size());
    for (std::size_t j = 0; j < r_.size(); ++j) lr[j] = std::log(r_[j]);
    const MonotoneCubic interp(std::move(lr), kappa_);
    interp_ = [interp](double lr) { return interp(lr); };
  }

  // with exact slopes d kappa / d log r: cubic Hermite instead of the monotone cubic
  MultiplierProfile(std::vector<double> r, std::vector<double> kappa, std::vector<double> slope,
                    std::function<double(double)> fallback)
      : r_(std::move(r)), kappa_(std::move(kappa)), fallback_(std::move(fallback)) {
    std::vector<double> lr(r_.size());
    for (std::size_t j = 0; j < r_.size(); ++j) lr[j] = std::log(r_[j]);
    auto interp = std::make_shared<const boost::math::interpolators::cubic_hermite<std::vector<double>>>(
        std::move(lr), std::vector<double>(kappa_), std::move(slope));
    interp_ = [interp](double lr) { return (*interp)(lr); };
  }

  [[nodiscard]] double operator()(double r) const {
    if (r < r_.front() || r > r_.back()) return fallback_(r);
    return interp_(std::log(r));
  }

  [[nodiscard]] const std::vector<double>& grid() const { return r_; }
  [[nodiscard]] const std::vector<double>& values() const { return kappa_; }

 private:
  std::vector<double> r_;
  std::vector<double> kappa_;
  std::function<double(double)> fallback_;
  std::function<double(double)> interp_;
};

struct ProfileOptions {
  double r_lo_scale = 1e-3;  // grid start, in units of the model scale
  double r_hi = 0.0;         // grid end (0: max(100 scale, 2 R_max))
  int per_decade = 40;
  double interp_tol = 1e-6;  // max relative interpolation error of phi*
  int max_refinements = 6;
};

// phi* tabulated on a geometric grid by incremental accumulation of both
// integrals, interpolated as a cubic Hermite of log phi in log r with exact
// slopes; the grid is refined until the in-cell error is below interp_tol.
class ShrinkageProfile {
 public:
  static ShrinkageProfile build(const RadialDensity& model, ProfileOptions opts = {}) {
    ShrinkageProfile profile;
    profile.model_ = std::make_shared<const RadialDensity>(model);
    profile.limit_ = phi_limit(model);
    const double lo = opts.r_lo_scale * model.scale();
    const double hi = opts.r_hi > 0.0 ? opts.r_hi : std::max(100.0 * model.scale(), 2.0 * r_max(model));
    int per_decade = opts.per_decade;
    for (int attempt = 0;; ++attempt) {
      profile.tabulate(geometric_grid(lo, hi, per_decade));
      profile.interp_error_ = profile.midpoint_error();
      if (profile.interp_error_ <= opts.interp_tol || attempt >= opts.max_refinements) break;
      per_decade *= 2;
    }
    return profile;
  }

  [[nodiscard]] int dimension() const { return model_->dimension(); }
  [[nodiscard]] const RadialDensity& model() const { return *model_; }
  [[nodiscard]] const std::vector<double>& r_grid() const { return r_; }
  [[nodiscard]] const std::vector<double>& phi_values() const { return phi_; }
  [[nodiscard]] double limit_value() const { return limit_; }
  [[nodiscard]] double interpolation_error() const { return interp_error_; }

  [[nodiscard]] double phi(double r) const {
    if (r <= 0.0) return 0.0;
    if (r < r_.front() || r > r_.back()) return phi_star(*model_, r);
    return interpolate(r);
  }

  // 1 - phi*(r) / r^2, with the r -> 0 limit 2/p at the origin
  [[nodiscard]] double multiplier(double r) const {
    if (r <= 0.0) return 2.0 / dimension();
    return 1.0 - phi(r) / (r * r);
  }

  [[nodiscard]] std::vector<double> estimate(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != dimension()) throw std::invalid_argument("estimate: x must have length p");
    double norm2 = 0.0;
    for (double v : x) norm2 += v * v;
    std::vector<double> out(x.begin(), x.end());
    if (norm2 == 0.0) return out;
    const double kappa = multiplier(std::sqrt(norm2));
    for (double& v : out) v *= kappa;
    return out;
  }

  [[nodiscard]] MultiplierProfile multiplier_profile() const {
    // kappa = 1 - phi / r^2, d kappa / d log r = -(phi / r^2)(d log phi / d log r - 2)
    std::vector<double> kappa(r_.size()), slope(r_.size());
    for (std::size_t j = 0; j < r_.size(); ++j) {
      const double q = phi_[j] / (r_[j] * r_[j]);
      kappa[j] = 1.0 - q;
      slope[j] = -q * (log_slope_[j] - 2.0);
    }
    auto self = *this;
    return MultiplierProfile(r_, std::move(kappa), std::move(slope), [self](double r) { return self.multiplier(r); });
  }

 private:
  void tabulate(std::vector<double> grid) {
    const int p = dimension();
    r_ = std::move(grid);
    phi_.assign(r_.size(), 0.0);
    std::vector<double> nums(r_.size()), dens(r_.size());
    double num = detail::f_moment_between(*model_, p - 1.0, 0.0, r_.front());
    double den = detail::f_moment_between(*model_, p - 3.0, 0.0, r_.front());
    for (std::size_t j = 0; j < r_.size(); ++j) {
      if (j > 0) {
        num += detail::f_moment_between(*model_, p - 1.0, r_[j - 1], r_[j]);
        den += detail::f_moment_between(*model_, p - 3.0, r_[j - 1], r_[j]);
      }
      nums[j] = num;
      dens[j] = den;
      phi_[j] = num / den;
    }
    // Hermite data in (log r, log phi) with the exact slope r F(r) (r^{p-1}/N - r^{p-3}/D)
    std::vector<double> lr(r_.size()), lp(r_.size()), slope(r_.size());
    for (std::size_t j = 0; j < r_.size(); ++j) {
      const double r = r_[j];
      lr[j] = std::log(r);
      lp[j] = std::log(phi_[j]);
      slope[j] = r * model_->big_f(r) * (std::pow(r, p - 1.0) / nums[j] - std::pow(r, p - 3.0) / dens[j]);
    }
    log_slope_ = slope;
    log_phi_ = std::make_shared<const boost::math::interpolators::cubic_hermite<std::vector<double>>>(
        std::move(lr), std::move(lp), std::move(slope));
  }

  [[nodiscard]] double interpolate(double r) const { return std::exp((*log_phi_)(std::log(r))); }

  // worst relative error at the midpoint and a quarter point of every cell
  [[nodiscard]] double midpoint_error() const {
    double worst = 0.0;
    for (std::size_t j = 0; j + 1 < r_.size(); ++j) {
      for (double t : {0.25, 0.5}) {
        const double r = r_[j] * std::pow(r_[j + 1] / r_[j], t);
        const double exact = phi_star(*model_, r);
        worst = std::max(worst, std::abs(interpolate(r) - exact) / exact);
      }
    }
    return worst;
  }

  std::shared_ptr<const RadialDensity> model_;
  std::vector<double> r_;
  std::vector<double> phi_;
  std::vector<double> log_slope_;
  std::shared_ptr<const boost::math::interpolators::cubic_hermite<std::vector<double>>> log_phi_;
  double limit_ = 0.0;
  double interp_error_ = 0.0;
};

// delta*(x); delta*(0) = 0
inline std::vector<double> estimate(const ShrinkageProfile& profile, std::span<const double> x) {
  return profile.estimate(x);
}

// Posterior-mean multiplier kappa(r) = <E[theta | x], x> / r^2 from the 2-D
// reduction of numerator and denominator.
inline double gb_multiplier(const RadialPrior& prior, const RadialDensity& model, double r, bool check_fg1 = true) {
  if (!(r > 0.0)) throw NumericError(NumericErrorKind::domain, "gb_multiplier requires r > 0");
  if (check_fg1 && !fg1_check(prior, model)) {
    throw NumericError(NumericErrorKind::divergence_suspected, "FG1 integrability fails for " + prior.id());
  }
  const double den = radial_expectation(prior_problem(prior, r, KernelKind::density), model);
  const double num = radial_expectation(prior_problem(prior, r, KernelKind::density, true), model);
  return num / den;
}

// kappa(r) tabulated for simulation; r_hi should cover the observation radii.
inline MultiplierProfile gb_multiplier_profile(const RadialPrior& prior, const RadialDensity& model, double r_hi,
                                               int per_decade = 24) {
  if (!fg1_check(prior, model)) {
    throw NumericError(NumericErrorKind::divergence_suspected, "FG1 integrability fails for " + prior.id());
  }
  const double lo = 1e-2 * model.scale();
  const auto grid = geometric_grid(lo, std::max(r_hi, 10.0 * lo), per_decade);
  std::vector<double> kappa(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) kappa[j] = gb_multiplier(prior, model, grid[j], false);
  const double kappa0 = kappa.front();
  return MultiplierProfile(grid, std::move(kappa), [prior, model, lo, kappa0](double r) {
    return r < lo ? kappa0 : gb_multiplier(prior, model, r, false);
  });
}

}  // namespace sphereshrink
