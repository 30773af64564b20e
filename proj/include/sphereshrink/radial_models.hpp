#pragma once

// Spherically symmetric density families f(||x - theta||) in R^p together
// with the tail kernel F(u) = int_u^inf s f(s) ds, moments and tail profile.

#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "sphereshrink/numerics.hpp"

namespace sphereshrink {

struct Gaussian {};

// f(s) = s^alpha exp(-beta s^2)
struct PolyExp {
  double alpha = 0.0;
  double beta = 0.5;
};

// f(t) = exp(-t^2/2) - a exp(-t^2/(2b))
struct MixtureDiff {
  double a = 0.5;
  double b = 0.5;
};

// Unnormalised samples (r_j, f(r_j)); log f is interpolated by cubic Hermite
// and continued past the last node by the power law through the last two.
struct Tabulated {
  std::vector<double> r;
  std::vector<double> f;
};

using FamilyParams = std::variant<Gaussian, PolyExp, MixtureDiff, Tabulated>;

struct TailProfile {
  double r0 = 1.0;
  double L = 0.0;
  double s = 0.0;
  // true when s is the reporting cap for a super-exponential tail
  bool capped = false;
};

// Moment index reported for tails decaying faster than any power.
inline constexpr double kSuperExponentialTailCap = 50.0;

class RadialDensity {
 public:
  // Builds the family with the normalising constant K such that
  // c_p int_0^inf r^{p-1} f(r) dr = 1. `scale` stretches the unit family:
  // f_scale(r) = K raw(r / scale).
  static RadialDensity normalize(FamilyParams family, int p, double scale = 1.0) {
    RadialDensity model;
    model.family_ = std::move(family);
    model.p_ = p;
    model.scale_ = scale;
    model.validate();
    if (auto* tab = std::get_if<Tabulated>(&model.family_)) {
      model.table_ = std::make_shared<const Table>(Table::build(*tab, p));
    }
    model.log_raw_mass_ = model.log_raw_mellin(static_cast<double>(p));
    const double pd = static_cast<double>(p);
    model.log_K_ = -(log_sphere_surface(pd) + model.log_raw_mass_ + pd * std::log(scale));
    model.K_ = std::exp(model.log_K_);
    return model;
  }

  [[nodiscard]] int dimension() const { return p_; }
  [[nodiscard]] double scale() const { return scale_; }
  [[nodiscard]] double norm_const() const { return K_; }
  [[nodiscard]] const FamilyParams& family() const { return family_; }
  [[nodiscard]] bool is_tabulated() const { return std::holds_alternative<Tabulated>(family_); }

  [[nodiscard]] std::string id() const {
    std::ostringstream out;
    std::visit(
        [&](const auto& fam) {
          using T = std::decay_t<decltype(fam)>;
          if constexpr (std::is_same_v<T, Gaussian>) {
            out << "gaussian";
          } else if constexpr (std::is_same_v<T, PolyExp>) {
            out << "polyexp(alpha=" << fam.alpha << ",beta=" << fam.beta << ")";
          } else if constexpr (std::is_same_v<T, MixtureDiff>) {
            out << "mixdiff(a=" << fam.a << ",b=" << fam.b << ")";
          } else {
            out << "tabulated(n=" << fam.r.size() << ")";
          }
        },
        family_);
    if (scale_ != 1.0) out << "[scale=" << scale_ << "]";
    out << "[p=" << p_ << "]";
    return out.str();
  }

  [[nodiscard]] double density(double r) const { return K_ * raw(r / scale_); }
  [[nodiscard]] double operator()(double r) const { return density(r); }

  [[nodiscard]] double log_density(double r) const { return log_K_ + log_raw(r / scale_); }

  // F(u) = int_u^inf s f(s) ds
  [[nodiscard]] double big_f(double u) const {
    if (!(u >= 0.0)) throw NumericError(NumericErrorKind::domain, "big_f requires u >= 0");
    return K_ * scale_ * scale_ * raw_big_f(u / scale_);
  }

  [[nodiscard]] double big_f0() const { return big_f(0.0); }

  // log F(u), finite even where F(u) underflows.
  [[nodiscard]] double log_big_f(double u) const {
    const double value = big_f(u);
    if (value > 1e-280) return std::log(value);
    return log_density(u) + std::log(f_ratio(u));
  }

  // F(t) / f(t), evaluated without forming either factor when both underflow.
  [[nodiscard]] double f_ratio(double t) const {
    const double v = t / scale_;
    const double s2 = scale_ * scale_;
    return std::visit(
        [&](const auto& fam) -> double {
          using T = std::decay_t<decltype(fam)>;
          if constexpr (std::is_same_v<T, Gaussian>) {
            return s2;
          } else if constexpr (std::is_same_v<T, PolyExp>) {
            if (v == 0.0) return fam.alpha > 0.0 ? std::numeric_limits<double>::infinity() : s2 / (2.0 * fam.beta);
            if (fam.beta * v * v < 500.0) return s2 * raw_big_f(v) / raw(v);
            // F/f = (1 + alpha int_1^inf u^{alpha-1} exp(beta v^2 (1-u^2)) du) / (2 beta)
            const double c = fam.beta * v * v;
            auto integrand = [&](double u) { return std::pow(u, fam.alpha - 1.0) * std::exp(c * (1.0 - u * u)); };
            const double tail = fam.alpha == 0.0
                                    ? 0.0
                                    : integrate_semi_infinite(integrand, 1.0, TailDecay::exponential,
                                                              QuadratureSpec{}, 1.0 / (2.0 * c))
                                          .value;
            return s2 * (1.0 + fam.alpha * tail) / (2.0 * fam.beta);
          } else if constexpr (std::is_same_v<T, MixtureDiff>) {
            const double q = fam.a * std::exp(-0.5 * v * v * (1.0 / fam.b - 1.0));
            if (q >= 1.0) return std::numeric_limits<double>::infinity();
            return s2 * (1.0 - fam.b * q) / (1.0 - q);
          } else {
            return s2 * std::exp(table_->log_big_f(v) - table_->log_f(v));
          }
        },
        family_);
  }

  // E_0 ||X||^k = c_p int_0^inf r^{p+k-1} f(r) dr
  [[nodiscard]] double moment(double k) const {
    const double q = static_cast<double>(p_) + k;
    if (!moment_converges(k)) {
      std::ostringstream msg;
      msg << "moment of order " << k << " diverges for " << id();
      throw NumericError(NumericErrorKind::divergence_suspected, msg.str());
    }
    return std::exp(k * std::log(scale_) + log_raw_mellin(q) - log_raw_mass_);
  }

  [[nodiscard]] bool moment_converges(double k) const {
    const double q = static_cast<double>(p_) + k;
    return std::visit(
        [&](const auto& fam) -> bool {
          using T = std::decay_t<decltype(fam)>;
          if constexpr (std::is_same_v<T, PolyExp>) {
            return q + fam.alpha > 0.0;
          } else if constexpr (std::is_same_v<T, Tabulated>) {
            return q > 0.0 && q + table_->tail_slope < 0.0;
          } else {
            return q > 0.0;
          }
        },
        family_);
  }

  // Smallest R (to bisection precision) with F(R) <= rel * F(0).
  [[nodiscard]] double effective_radius(double rel = 1e-10) const {
    const double target = rel * big_f0();
    double hi = scale_;
    while (big_f(hi) > target) {
      hi *= 2.0;
      if (hi > 1e12 * scale_) return hi;
    }
    double lo = 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (big_f(mid) > target ? lo : hi) = mid;
    }
    return hi;
  }

  // Decay class for semi-infinite quadrature of f- or F-weighted integrands.
  [[nodiscard]] TailDecay tail_decay() const { return is_tabulated() ? TailDecay::power : TailDecay::exponential; }

  [[nodiscard]] TailProfile tail_profile() const {
    TailProfile profile;
    profile.r0 = scale_;
    const double pd = static_cast<double>(p_);
    if (is_tabulated()) {
      profile.s = table_->tail_index(p_);
      if (profile.s > kSuperExponentialTailCap) {
        profile.s = kSuperExponentialTailCap;
        profile.capped = true;
      }
    } else {
      profile.s = kSuperExponentialTailCap;
      profile.capped = true;
    }
    // L = sup over a fine geometric grid of r^{p+s} f(r), r >= r0
    double log_L = -std::numeric_limits<double>::infinity();
    const double r_hi = is_tabulated() ? table_->r.back() * scale_ * 1e3 : scale_ * 1e3;
    for (double r : geometric_grid(profile.r0, r_hi, 200)) {
      log_L = std::max(log_L, (pd + profile.s) * std::log(r) + log_density(r));
    }
    profile.L = std::exp(log_L) * (1.0 + 1e-12);
    return profile;
  }

 private:
  struct Table {
    std::vector<double> r;
    std::vector<double> f;
    std::shared_ptr<const boost::math::interpolators::cubic_hermite<std::vector<double>>> log_f_interp;
    double tail_slope = 0.0;  // d log f / d log r beyond the last node
    // F at every node, accumulated backwards from the analytic power tail
    std::vector<double> big_f_nodes;

    static Table build(const Tabulated& spec, int p) {
      if (spec.r.size() != spec.f.size() || spec.r.size() < 4) {
        throw std::invalid_argument("tabulated density needs at least four (r, f) pairs");
      }
      Table t;
      t.r = spec.r;
      t.f = spec.f;
      for (std::size_t j = 0; j < t.r.size(); ++j) {
        if (t.f[j] < 0.0) throw std::invalid_argument("negative density detected in tabulated model");
        if (!(t.f[j] > 0.0)) throw std::invalid_argument("tabulated density must be strictly positive on its grid");
        if (t.r[j] < 0.0 || (j > 0 && !(t.r[j] > t.r[j - 1]))) {
          throw std::invalid_argument("tabulated radii must be nonnegative and strictly increasing");
        }
      }
      const std::size_t n = t.r.size();
      std::vector<double> x = t.r;
      std::vector<double> y(n), dy(n);
      for (std::size_t j = 0; j < n; ++j) y[j] = std::log(t.f[j]);
      // three-point derivative, exact for quadratics on uneven spacing
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t a = j == 0 ? 0 : (j == n - 1 ? n - 3 : j - 1);
        const double x0 = x[a], x1 = x[a + 1], x2 = x[a + 2];
        const double y0 = y[a], y1 = y[a + 1], y2 = y[a + 2];
        const double xj = x[j];
        dy[j] = y0 * (2 * xj - x1 - x2) / ((x0 - x1) * (x0 - x2)) + y1 * (2 * xj - x0 - x2) / ((x1 - x0) * (x1 - x2)) +
                y2 * (2 * xj - x0 - x1) / ((x2 - x0) * (x2 - x1));
      }
      t.log_f_interp = std::make_shared<const boost::math::interpolators::cubic_hermite<std::vector<double>>>(
          std::move(x), std::move(y), std::move(dy));
      const double r1 = t.r[n - 2], r2 = t.r[n - 1];
      t.tail_slope = (std::log(t.f[n - 1]) - std::log(t.f[n - 2])) / (std::log(r2) - std::log(r1));
      if (!(t.tail_slope < -static_cast<double>(p))) {
        throw std::invalid_argument("tabulated density is not integrable: tail slope must be below -p");
      }
      t.big_f_nodes.assign(n, 0.0);
      double acc = t.f[n - 1] * r2 * r2 / (-t.tail_slope - 2.0);
      t.big_f_nodes[n - 1] = acc;
      for (std::size_t j = n - 1; j-- > 0;) {
        const QuadratureSpec spec{1e-300, 1e-13, 2000, {}};
        acc += integrate([&](double s) { return s * t.f_at(s); }, t.r[j], t.r[j + 1], spec).value;
        t.big_f_nodes[j] = acc;
      }
      return t;
    }

    [[nodiscard]] double f_at(double v) const {
      if (v <= r.front()) return f.front();
      if (v >= r.back()) return f.back() * std::pow(v / r.back(), tail_slope);
      return std::exp((*log_f_interp)(v));
    }

    [[nodiscard]] double log_f(double v) const {
      if (v <= r.front()) return std::log(f.front());
      if (v >= r.back()) return std::log(f.back()) + tail_slope * std::log(v / r.back());
      return (*log_f_interp)(v);
    }

    [[nodiscard]] double big_f_at(double u) const {
      if (u >= r.back()) return f.back() * std::pow(u / r.back(), tail_slope) * u * u / (-tail_slope - 2.0);
      if (u <= r.front()) {
        return big_f_nodes.front() + 0.5 * f.front() * (r.front() * r.front() - u * u);
      }
      const auto it = std::upper_bound(r.begin(), r.end(), u);
      const auto j = static_cast<std::size_t>(it - r.begin());
      return big_f_nodes[j] +
             integrate([&](double s) { return s * f_at(s); }, u, r[j], QuadratureSpec{1e-300, 1e-13, 2000, {}}).value;
    }

    [[nodiscard]] double log_big_f(double u) const { return std::log(big_f_at(u)); }

    // int_0^inf v^{q-1} f(v) dv on the interpolant plus the analytic tail
    [[nodiscard]] double mellin(double q) const {
      double total = f.front() * std::pow(r.front(), q) / q;
      for (std::size_t j = 0; j + 1 < r.size(); ++j) {
        total += integrate([&](double v) { return std::pow(v, q - 1.0) * f_at(v); }, r[j], r[j + 1],
                           QuadratureSpec{1e-300, 1e-13, 2000, {}})
                     .value;
      }
      total += f.back() * std::pow(r.back(), q) / (-(q + tail_slope));
      return total;
    }

    // s such that r^{p+s} f(r) is bounded: least-squares log-log slope over the
    // top two decades of the table (or its upper quarter when shorter).
    [[nodiscard]] double tail_index(int p) const {
      const double top = std::log10(r.back());
      const double span = std::log10(r.back() / std::max(r.front(), r.back() * 1e-12));
      const double from = span >= 8.0 ? top - 2.0 : top - span / 4.0;
      std::vector<double> lx, ly;
      for (std::size_t j = 0; j < r.size(); ++j) {
        if (r[j] > 0.0 && std::log10(r[j]) >= from) {
          lx.push_back(std::log(r[j]));
          ly.push_back(std::log(f[j]));
        }
      }
      if (lx.size() < 2) return -tail_slope - static_cast<double>(p);
      return -fit_slope(lx, ly) - static_cast<double>(p);
    }
  };

  void validate() const {
    if (p_ < 3) throw std::invalid_argument("dimension p must be at least 3");
    if (!(scale_ > 0.0) || !std::isfinite(scale_)) throw std::invalid_argument("scale must be positive");
    std::visit(
        [](const auto& fam) {
          using T = std::decay_t<decltype(fam)>;
          if constexpr (std::is_same_v<T, PolyExp>) {
            if (!(fam.alpha >= 0.0) || !(fam.beta > 0.0)) {
              throw std::invalid_argument("polyexp requires alpha >= 0 and beta > 0");
            }
          } else if constexpr (std::is_same_v<T, MixtureDiff>) {
            if (!(fam.a > 0.0 && fam.a <= 1.0) || !(fam.b > 0.0 && fam.b < 1.0)) {
              throw std::invalid_argument("mixdiff requires 0 < a <= 1 and 0 < b < 1");
            }
          }
        },
        family_);
  }

  [[nodiscard]] double raw(double v) const {
    return std::visit(
        [&](const auto& fam) -> double {
          using T = std::decay_t<decltype(fam)>;
          if constexpr (std::is_same_v<T, Gaussian>) {
            return std::exp(-0.5 * v * v);
          } else if constexpr (std::is_same_v<T, PolyExp>) {
            return (fam.alpha == 0.0 ? 1.0 : std::pow(v, fam.alpha)) * std::exp(-fam.beta * v * v);
          } else if constexpr (std::is_same_v<T, MixtureDiff>) {
            // e^{-v^2/2} (1 - q), q = a e^{-v^2 (1/b - 1)/2}; expm1 keeps 1 - q exact when a = 1
            const double e = -0.5 * v * v * (1.0 / fam.b - 1.0);
            const double one_minus_q = fam.a == 1.0 ? -std::expm1(e) : 1.0 - fam.a * std::exp(e);
            return std::exp(-0.5 * v * v) * one_minus_q;
          } else {
            return table_->f_at(v);
          }
        },
        family_);
  }

  [[nodiscard]] double log_raw(double v) const {
    return std::visit(
        [&](const auto& fam) -> double {
          using T = std::decay_t<decltype(fam)>;
          if constexpr (std::is_same_v<T, Gaussian>) {
            return -0.5 * v * v;
          } else if constexpr (std::is_same_v<T, PolyExp>) {
            return (fam.alpha == 0.0 ? 0.0 : fam.alpha * std::log(v)) - fam.beta * v * v;
          } else if constexpr (std::is_same_v<T, MixtureDiff>) {
            const double e = -0.5 * v * v * (1.0 / fam.b - 1.0);
            if (fam.a == 1.0) return -0.5 * v * v + std::log(-std::expm1(e));
            return -0.5 * v * v + std::log1p(-fam.a * std::exp(e));
          } else {
            return table_->log_f(v);
          }
        },
        family_);
  }

  [[nodiscard]] double raw_big_f(double v) const {
    return std::visit(
        [&](const auto& fam) -> double {
          using T = std::decay_t<decltype(fam)>;
          if constexpr (std::is_same_v<T, Gaussian>) {
            return std::exp(-0.5 * v * v);
          } else if constexpr (std::is_same_v<T, PolyExp>) {
            const double s = 0.5 * fam.alpha + 1.0;
            return 0.5 * std::pow(fam.beta, -s) * upper_incomplete_gamma(s, fam.beta * v * v);
          } else if constexpr (std::is_same_v<T, MixtureDiff>) {
            return std::exp(-0.5 * v * v) - fam.a * fam.b * std::exp(-0.5 * v * v / fam.b);
          } else {
            return table_->big_f_at(v);
          }
        },
        family_);
  }

  // log int_0^inf v^{q-1} raw(v) dv
  [[nodiscard]] double log_raw_mellin(double q) const {
    return std::visit(
        [&](const auto& fam) -> double {
          using T = std::decay_t<decltype(fam)>;
          const double gauss_part = (0.5 * q - 1.0) * std::log(2.0) + log_gamma(0.5 * q);
          if constexpr (std::is_same_v<T, Gaussian>) {
            return gauss_part;
          } else if constexpr (std::is_same_v<T, PolyExp>) {
            const double m = 0.5 * (q + fam.alpha);
            return -std::log(2.0) - m * std::log(fam.beta) + log_gamma(m);
          } else if constexpr (std::is_same_v<T, MixtureDiff>) {
            return gauss_part + std::log1p(-fam.a * std::pow(fam.b, 0.5 * q));
          } else {
            return std::log(table_->mellin(q));
          }
        },
        family_);
  }

  FamilyParams family_;
  int p_ = 3;
  double scale_ = 1.0;
  double K_ = 0.0;
  double log_K_ = 0.0;
  double log_raw_mass_ = 0.0;
  std::shared_ptr<const Table> table_;
};

// Free-function spellings of the model operations.
inline RadialDensity normalize(FamilyParams family, int p, double scale = 1.0) {
  return RadialDensity::normalize(std::move(family), p, scale);
}
inline double big_f(const RadialDensity& model, double u) { return model.big_f(u); }
inline double moment(const RadialDensity& model, double k) { return model.moment(k); }
inline TailProfile tail_profile(const RadialDensity& model) { return model.tail_profile(); }

}  // namespace sphereshrink
