#pragma once

// Regularly varying prior machinery: log-tower beta kernels, the H_i
// approximation sequence, radial prior families, assumption audits and the
// integral diagnostics used to classify priors.
//
// Quantities that only depend on log(eta + c) are exposed in the log domain so
// that diagnostics can reach eta far beyond the double range.

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "sphereshrink/numerics.hpp"
#include "sphereshrink/radial_models.hpp"

namespace sphereshrink {

// Log_1(x), ..., Log_n(x) from log x. Throws if a level is not positive.
inline std::vector<double> log_levels(double log_x, int n) {
  std::vector<double> levels(static_cast<std::size_t>(n));
  double current = log_x;
  for (int i = 0; i < n; ++i) {
    if (!(current > 0.0)) {
      throw NumericError(NumericErrorKind::domain, "iterated logarithm is not positive");
    }
    levels[static_cast<std::size_t>(i)] = current;
    if (i + 1 < n) current = std::log(current);
  }
  return levels;
}

// log(exp(log_eta) + c) without forming exp(log_eta) when it would overflow.
inline double log_shifted(double log_eta, double c) {
  if (log_eta > 0.0) return log_eta + std::log1p(c * std::exp(-log_eta));
  return std::log(std::exp(log_eta) + c);
}

// Tower offset with Log_n(c) = 1: e, e^e, e^{e^e}, ...
inline double tower_offset(int n) {
  double c = 1.0;
  for (int i = 0; i < n; ++i) c = std::exp(c);
  return c;
}

struct LogTower {
  int n = 1;
  double c = std::numbers::e;

  void validate() const {
    if (n < 1) throw std::invalid_argument("log tower depth n must be at least 1");
    double level = c;
    for (int i = 0; i < n; ++i) {
      if (!(level > 0.0)) throw std::invalid_argument("log tower offset c must satisfy Log_n(c) > 0");
      level = std::log(level);
    }
    if (!(level > 0.0)) throw std::invalid_argument("log tower offset c must satisfy Log_n(c) > 0");
  }
};

// beta(eta) = 1 / ((eta+c) Log_n^2 prod_{i<n} Log_i), with tail 1/Log_n(eta+c).
class BetaKernel {
 public:
  BetaKernel() : BetaKernel(LogTower{}) {}
  explicit BetaKernel(LogTower tower) : tower_(tower) { tower_.validate(); }
  BetaKernel(int n, double c) : BetaKernel(LogTower{n, c}) {}

  static BetaKernel standard(int n) { return BetaKernel(n, tower_offset(n)); }

  [[nodiscard]] const LogTower& tower() const { return tower_; }
  [[nodiscard]] int depth() const { return tower_.n; }
  [[nodiscard]] double offset() const { return tower_.c; }

  [[nodiscard]] double log_x(double eta) const { return std::log(eta + tower_.c); }
  [[nodiscard]] double log_x_from_log_eta(double log_eta) const { return log_shifted(log_eta, tower_.c); }

  [[nodiscard]] double log_beta_at(double log_x) const {
    const auto L = log_levels(log_x, tower_.n);
    double acc = -log_x - 2.0 * std::log(L.back());
    for (std::size_t i = 0; i + 1 < L.size(); ++i) acc -= std::log(L[i]);
    return acc;
  }

  [[nodiscard]] double log_tail_at(double log_x) const { return -std::log(log_levels(log_x, tower_.n).back()); }

  // x * (-beta'(eta) / beta(eta)) = 1 + sum_{i<n} 1/P_i + 2/P_n, P_i = Log_1 ... Log_i
  [[nodiscard]] double x_neg_log_slope_at(double log_x) const {
    const auto L = log_levels(log_x, tower_.n);
    double prod = 1.0;
    double acc = 1.0;
    for (std::size_t i = 0; i < L.size(); ++i) {
      prod *= L[i];
      acc += (i + 1 == L.size() ? 2.0 : 1.0) / prod;
    }
    return acc;
  }

  // log of x beta / tail = -sum_i log Log_i
  [[nodiscard]] double log_x_beta_over_tail_at(double log_x) const {
    double acc = 0.0;
    for (double level : log_levels(log_x, tower_.n)) acc -= std::log(level);
    return acc;
  }

  [[nodiscard]] double value(double eta) const { return std::exp(log_beta_at(log_x(eta))); }
  [[nodiscard]] double operator()(double eta) const { return value(eta); }
  [[nodiscard]] double tail(double eta) const { return std::exp(log_tail_at(log_x(eta))); }
  [[nodiscard]] double derivative(double eta) const {
    const double lx = log_x(eta);
    return -std::exp(log_beta_at(lx) - lx) * x_neg_log_slope_at(lx);
  }

 private:
  LogTower tower_;
};

inline double beta_eval(const BetaKernel& kernel, double eta) { return kernel.value(eta); }
inline double beta_tail(const BetaKernel& kernel, double eta) { return kernel.tail(eta); }

// H_i(eta) = int_eta^inf e^{(eta-r)/i} beta(r) dr / int_eta^inf beta(r) dr
class HSequence {
 public:
  HSequence(BetaKernel kernel, double index, QuadratureSpec spec = {})
      : kernel_(std::move(kernel)), index_(index), spec_(std::move(spec)) {
    if (!(index_ >= 1.0)) throw std::invalid_argument("H-sequence index must be at least 1");
  }

  [[nodiscard]] const BetaKernel& kernel() const { return kernel_; }
  [[nodiscard]] double index() const { return index_; }

  // N / beta(eta), N = int_0^inf e^{-u/i} beta(eta + u) du
  [[nodiscard]] double n_over_beta(double eta) const {
    const double lx0 = kernel_.log_x(eta);
    const double lb0 = kernel_.log_beta_at(lx0);
    auto integrand = [&](double u) {
      return std::exp(-u / index_ + kernel_.log_beta_at(kernel_.log_x(eta + u)) - lb0);
    };
    return split_integral(integrand);
  }

  // x N_neg / beta(eta), N_neg = int_0^inf e^{-u/i} (-beta'(eta + u)) du = beta(eta) - N / i
  [[nodiscard]] double x_nneg_over_beta(double eta) const {
    const double x = eta + kernel_.offset();
    const double lx0 = std::log(x);
    const double lb0 = kernel_.log_beta_at(lx0);
    auto integrand = [&](double u) {
      const double lx = kernel_.log_x(eta + u);
      return std::exp(-u / index_ + kernel_.log_beta_at(lx) - lb0) * kernel_.x_neg_log_slope_at(lx) * (x / (x + u));
    };
    return split_integral(integrand);
  }

  [[nodiscard]] double value(double eta) const {
    const double lx = kernel_.log_x(eta);
    return n_over_beta(eta) * std::exp(kernel_.log_x_beta_over_tail_at(lx) - lx);
  }
  [[nodiscard]] double operator()(double eta) const { return value(eta); }

  // log H_i at eta = exp(log_eta); past the double range N / beta equals i to
  // within a relative error of order i / eta.
  [[nodiscard]] double log_value_at_log_eta(double log_eta) const {
    const double lx = kernel_.log_x_from_log_eta(log_eta);
    const double ratio = log_eta < 650.0 ? n_over_beta(std::exp(log_eta)) : index_;
    return std::log(ratio) + kernel_.log_x_beta_over_tail_at(lx) - lx;
  }

  // H' = beta N / T^2 - N_neg / T
  [[nodiscard]] double derivative(double eta) const {
    const double x = eta + kernel_.offset();
    const double lx = std::log(x);
    const double q = std::exp(kernel_.log_x_beta_over_tail_at(lx));
    return q / (x * x) * (n_over_beta(eta) * q - x_nneg_over_beta(eta));
  }

  // eta H'(eta) / H(eta)
  [[nodiscard]] double log_slope(double eta) const {
    const double x = eta + kernel_.offset();
    const double q = std::exp(kernel_.log_x_beta_over_tail_at(std::log(x)));
    return (eta / x) * (q - x_nneg_over_beta(eta) / n_over_beta(eta));
  }

 private:
  // beta varies on the scale of x while the weight decays on the scale i:
  // [0, i] is integrated directly with decade breakpoints, the rest mapped.
  template <class F>
  [[nodiscard]] double split_integral(F& integrand) const {
    QuadratureSpec head = spec_;
    for (double u = 1.0; u < index_; u *= 10.0) head.singularity_hints.push_back(u);
    return integrate(integrand, 0.0, index_, head).value +
           integrate_semi_infinite(integrand, index_, TailDecay::exponential, spec_, index_).value;
  }

  BetaKernel kernel_;
  double index_;
  QuadratureSpec spec_;
};

inline double h_eval(const HSequence& seq, double eta) { return seq.value(eta); }
inline double h_derivative(const HSequence& seq, double eta) {
  if (!(eta > 0.0)) throw NumericError(NumericErrorKind::domain, "h_derivative requires eta > 0");
  return seq.derivative(eta);
}

// ---------------------------------------------------------------------------
// Priors

struct PowerPrior {
  double k = 0.0;
};

// G = eta^{2-p} prod_{i=1}^{n} Log_i(eta + c), the last factor raised to top_power.
struct LogThickenedPrior {
  int n = 1;
  double c = 2.0;
  double top_power = 1.0;
};

struct CustomPrior {
  std::function<double(double)> g;
  std::function<double(double)> dg;
  std::function<double(double)> d2g;
  std::string label = "custom";
};

using PriorFamily = std::variant<PowerPrior, LogThickenedPrior, CustomPrior>;

struct AssumptionProfile {
  double t0 = 0.0;
  double t1 = 0.0;
  double t2 = 0.0;
  double t3 = 0.0;
  double t4 = 0.0;
  double r1 = 1.0;
};

class RadialPrior {
 public:
  RadialPrior(PriorFamily family, int p, double gamma = 2.0, std::vector<double> d = {})
      : family_(std::move(family)), p_(p), gamma_(gamma), d_(std::move(d)) {
    if (p_ < 1) throw std::invalid_argument("prior dimension must be positive");
    if (d_.empty()) d_.assign(static_cast<std::size_t>(p_), 1.0);
    validate();
  }

  static RadialPrior power(double k, int p) { return RadialPrior(PowerPrior{k}, p); }
  static RadialPrior harmonic(int p) { return RadialPrior(PowerPrior{2.0 - p}, p); }
  static RadialPrior flat(int p) { return RadialPrior(PowerPrior{0.0}, p); }
  static RadialPrior log_thickened(int n, double c, int p, double top_power = 1.0) {
    return RadialPrior(LogThickenedPrior{n, c, top_power}, p);
  }
  static RadialPrior custom(CustomPrior spec, int p) { return RadialPrior(std::move(spec), p); }

  [[nodiscard]] const PriorFamily& family() const { return family_; }
  [[nodiscard]] int dimension() const { return p_; }
  [[nodiscard]] double gamma() const { return gamma_; }
  [[nodiscard]] const std::vector<double>& norm_weights() const { return d_; }
  [[nodiscard]] const AssumptionProfile& profile() const { return profile_; }

  RadialPrior& with_gamma(double gamma) {
    gamma_ = gamma;
    validate();
    return *this;
  }
  RadialPrior& with_profile(const AssumptionProfile& profile) {
    profile_ = profile;
    return *this;
  }

  [[nodiscard]] bool euclidean() const {
    return std::all_of(d_.begin(), d_.end(), [](double v) { return v == 1.0; });
  }

  [[nodiscard]] bool is_power() const { return std::holds_alternative<PowerPrior>(family_); }
  [[nodiscard]] bool is_harmonic() const {
    const auto* pw = std::get_if<PowerPrior>(&family_);
    return pw && pw->k == 2.0 - p_;
  }
  [[nodiscard]] bool is_flat() const {
    const auto* pw = std::get_if<PowerPrior>(&family_);
    return pw && pw->k == 0.0;
  }
  [[nodiscard]] bool is_custom() const { return std::holds_alternative<CustomPrior>(family_); }

  // Number of iterated-log factors (0 for power priors).
  [[nodiscard]] int log_depth() const {
    if (const auto* lt = std::get_if<LogThickenedPrior>(&family_)) return lt->n;
    return 0;
  }

  [[nodiscard]] std::string id() const {
    std::ostringstream out;
    std::visit(
        [&](const auto& fam) {
          using T = std::decay_t<decltype(fam)>;
          if constexpr (std::is_same_v<T, PowerPrior>) {
            if (fam.k == 2.0 - p_) {
              out << "harmonic";
            } else if (fam.k == 0.0) {
              out << "flat";
            } else {
              out << "power(k=" << fam.k << ")";
            }
          } else if constexpr (std::is_same_v<T, LogThickenedPrior>) {
            out << "logthick(n=" << fam.n << ",c=" << fam.c;
            if (fam.top_power != 1.0) out << ",top=" << fam.top_power;
            out << ")";
          } else {
            out << fam.label;
          }
        },
        family_);
    out << "[p=" << p_ << "]";
    return out.str();
  }

  [[nodiscard]] double value(double eta) const {
    if (const auto* cu = std::get_if<CustomPrior>(&family_)) return cu->g(eta);
    return std::exp(log_value(eta));
  }
  [[nodiscard]] double operator()(double eta) const { return value(eta); }

  [[nodiscard]] double log_value(double eta) const {
    if (const auto* cu = std::get_if<CustomPrior>(&family_)) return std::log(cu->g(eta));
    return log_value_at_log_eta(std::log(eta));
  }

  // log G at eta = exp(log_eta); custom priors are limited to the double range.
  [[nodiscard]] double log_value_at_log_eta(double log_eta) const {
    return std::visit(
        [&](const auto& fam) -> double {
          using T = std::decay_t<decltype(fam)>;
          if constexpr (std::is_same_v<T, PowerPrior>) {
            return fam.k == 0.0 ? 0.0 : fam.k * log_eta;
          } else if constexpr (std::is_same_v<T, LogThickenedPrior>) {
            const auto L = log_levels(log_shifted(log_eta, fam.c), fam.n);
            double acc = (2.0 - p_) * log_eta;
            for (std::size_t i = 0; i < L.size(); ++i) {
              acc += (i + 1 == L.size() ? fam.top_power : 1.0) * std::log(L[i]);
            }
            return acc;
          } else {
            if (log_eta > 700.0) {
              throw NumericError(NumericErrorKind::domain, "custom prior evaluated beyond the double range");
            }
            return std::log(fam.g(std::exp(log_eta)));
          }
        },
        family_);
  }

  // (log G)'(eta)
  [[nodiscard]] double log_gradient(double eta) const {
    return std::visit(
        [&](const auto& fam) -> double {
          using T = std::decay_t<decltype(fam)>;
          if constexpr (std::is_same_v<T, PowerPrior>) {
            return fam.k / eta;
          } else if constexpr (std::is_same_v<T, LogThickenedPrior>) {
            const double x = eta + fam.c;
            const auto L = log_levels(std::log(x), fam.n);
            double acc = (2.0 - p_) / eta;
            double prod = 1.0;
            for (std::size_t i = 0; i < L.size(); ++i) {
              prod *= L[i];
              acc += (i + 1 == L.size() ? fam.top_power : 1.0) / (x * prod);
            }
            return acc;
          } else {
            require_derivatives(fam);
            return fam.dg(eta) / fam.g(eta);
          }
        },
        family_);
  }

  [[nodiscard]] double derivative(double eta) const { return value(eta) * log_gradient(eta); }

  [[nodiscard]] double second_derivative(double eta) const {
    return std::visit(
        [&](const auto& fam) -> double {
          using T = std::decay_t<decltype(fam)>;
          if constexpr (std::is_same_v<T, PowerPrior>) {
            return fam.k * (fam.k - 1.0) * std::pow(eta, fam.k - 2.0);
          } else if constexpr (std::is_same_v<T, LogThickenedPrior>) {
            const double u = log_gradient(eta);
            return value(eta) * (u * u + log_gradient_prime(fam, eta));
          } else {
            require_derivatives(fam);
            return fam.d2g(eta);
          }
        },
        family_);
  }

  // eta G'(eta) / G(eta)
  [[nodiscard]] double log_deriv(double eta) const { return eta * log_gradient(eta); }

  // eta G''(eta) / G'(eta)
  [[nodiscard]] double curvature_index(double eta) const {
    return std::visit(
        [&](const auto& fam) -> double {
          using T = std::decay_t<decltype(fam)>;
          if constexpr (std::is_same_v<T, PowerPrior>) {
            return fam.k - 1.0;
          } else if constexpr (std::is_same_v<T, LogThickenedPrior>) {
            const double u = log_gradient(eta);
            return eta * (u * u + log_gradient_prime(fam, eta)) / u;
          } else {
            require_derivatives(fam);
            return eta * fam.d2g(eta) / fam.dg(eta);
          }
        },
        family_);
  }

  // Regular-variation index: exact for the built-in families, otherwise the
  // least-squares slope of log G on log eta over the top two decades of [1, 1e8].
  [[nodiscard]] double rv_index() const {
    if (const auto* pw = std::get_if<PowerPrior>(&family_)) return pw->k;
    if (std::holds_alternative<LogThickenedPrior>(family_)) return 2.0 - p_;
    std::vector<double> lx, ly;
    for (double eta : geometric_grid(1e6, 1e8, 20)) {
      lx.push_back(std::log(eta));
      ly.push_back(log_value(eta));
    }
    return fit_slope(lx, ly);
  }

 private:
  void validate() const {
    if (!(gamma_ > 0.0 && gamma_ <= 2.0)) throw std::invalid_argument("gamma must lie in (0, 2]");
    if (d_.size() != static_cast<std::size_t>(p_)) throw std::invalid_argument("norm weights must have length p");
    for (std::size_t i = 0; i < d_.size(); ++i) {
      if (!(d_[i] >= 1.0)) throw std::invalid_argument("norm weights must be >= 1");
      if (i > 0 && d_[i] > d_[i - 1]) throw std::invalid_argument("norm weights must be sorted nonincreasing");
    }
    if (const auto* lt = std::get_if<LogThickenedPrior>(&family_)) {
      if (lt->n < 0) throw std::invalid_argument("log-thickened depth must be nonnegative");
      if (!(lt->top_power > 0.0)) throw std::invalid_argument("log-thickened top power must be positive");
      if (lt->n > 0) LogTower{lt->n, lt->c}.validate();
    }
    if (const auto* cu = std::get_if<CustomPrior>(&family_)) {
      if (!cu->g) throw std::invalid_argument("custom prior needs G");
    }
  }

  static void require_derivatives(const CustomPrior& fam) {
    if (!fam.dg || !fam.d2g) {
      throw std::invalid_argument("derivative unavailable: custom prior " + fam.label + " lacks G' or G''");
    }
  }

  // d/d eta of (log G)' for the log-thickened family
  [[nodiscard]] double log_gradient_prime(const LogThickenedPrior& fam, double eta) const {
    const double x = eta + fam.c;
    const auto L = log_levels(std::log(x), fam.n);
    double acc = -(2.0 - p_) / (eta * eta);
    double prod = 1.0;
    double inner = 1.0;
    for (std::size_t i = 0; i < L.size(); ++i) {
      prod *= L[i];
      inner += 1.0 / prod;
      acc -= (i + 1 == L.size() ? fam.top_power : 1.0) * inner / (x * x * prod);
    }
    return acc;
  }

  PriorFamily family_;
  int p_;
  double gamma_;
  std::vector<double> d_;
  AssumptionProfile profile_;
};

inline double prior_eval(const RadialPrior& prior, double eta) { return prior.value(eta); }
inline double prior_log_deriv(const RadialPrior& prior, double eta) {
  if (!(eta > 0.0)) throw NumericError(NumericErrorKind::domain, "prior_log_deriv requires eta > 0");
  return prior.log_deriv(eta);
}

struct AssumptionAudit {
  AssumptionProfile profile;
  bool t0_passes = false;  // t0 > 1 - p
  bool curvature_defined = true;
  std::vector<double> grid;
};

// Empirical G1 / G1'' bounds over [r1, max grid], and the eta -> 0 limit of
// eta G'/G estimated at grid.front() * 1e-5.
inline AssumptionAudit prior_assumption_audit(const RadialPrior& prior, std::vector<double> grid = {},
                                              double r1 = 1.0) {
  if (grid.empty()) grid = geometric_grid(1e-3, 1e8, 10);
  AssumptionAudit audit;
  audit.grid = grid;
  auto& pr = audit.profile;
  pr.r1 = r1;
  pr.t0 = prior.log_deriv(grid.front() * 1e-5);
  pr.t1 = pr.t3 = std::numeric_limits<double>::infinity();
  pr.t2 = pr.t4 = -std::numeric_limits<double>::infinity();
  for (double eta : grid) {
    if (eta < r1) continue;
    const double a = prior.log_deriv(eta);
    pr.t1 = std::min(pr.t1, a);
    pr.t2 = std::max(pr.t2, a);
    const double b = prior.curvature_index(eta);
    if (!std::isfinite(b)) {
      audit.curvature_defined = false;
      continue;
    }
    pr.t3 = std::min(pr.t3, b);
    pr.t4 = std::max(pr.t4, b);
  }
  audit.t0_passes = pr.t0 > 1.0 - prior.dimension();
  return audit;
}

// ---------------------------------------------------------------------------
// Divergence diagnostics

enum class Divergence { converges, diverges, indeterminate };

inline const char* to_string(Divergence d) {
  switch (d) {
    case Divergence::converges: return "converges";
    case Divergence::diverges: return "diverges";
    case Divergence::indeterminate: return "indeterminate";
  }
  return "unknown";
}

struct DivergenceOptions {
  // blocks cover eta in [1, e] and then w = log log eta in [0, w_max] in unit steps
  double w_max = 12.0;
  double converge_rel = 1e-4;
  double flat_tol = 1e-8;
};

struct DivergenceReport {
  Divergence verdict = Divergence::indeterminate;
  double value = 0.0;  // partial integral up to the last block
  std::vector<double> block_ends;  // log log eta at the end of each block (first block: 0)
  std::vector<double> increments;
};

// Classifies int_1^inf phi(eta) d eta given log phi as a function of log eta.
// Each block's increment is computed in the variable w = log log eta, so the
// partial integrals reach eta = exp(exp(w_max)).
template <class LogIntegrand>
DivergenceReport classify_tail_integral(LogIntegrand&& log_phi, const DivergenceOptions& opts = {}) {
  DivergenceReport report;
  const QuadratureSpec spec{1e-300, 1e-10, 2000, {}};
  auto block = [&](auto&& f, double a, double b) {
    try {
      return integrate(f, a, b, spec).value;
    } catch (const NumericError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  auto push = [&](double end, double inc) {
    report.block_ends.push_back(end);
    report.increments.push_back(inc);
    report.value += inc;
    return std::isfinite(inc) && std::isfinite(report.value);
  };
  if (!push(0.0, block([&](double l) { return std::exp(log_phi(l) + l); }, 0.0, 1.0))) {
    report.verdict = Divergence::diverges;
    return report;
  }
  const int blocks = static_cast<int>(std::floor(opts.w_max));
  for (int k = 0; k < blocks; ++k) {
    const double inc = block(
        [&](double w) {
          const double l = std::exp(w);
          return std::exp(log_phi(l) + l + w);
        },
        static_cast<double>(k), static_cast<double>(k + 1));
    if (!push(static_cast<double>(k + 1), inc)) {
      report.verdict = Divergence::diverges;
      return report;
    }
  }
  const auto& inc = report.increments;
  const std::size_t m = inc.size();
  if (report.value > 0.0 && inc[m - 1] / report.value < opts.converge_rel) {
    report.verdict = Divergence::converges;
  } else if (m >= 3 && inc[m - 1] >= inc[m - 2] * (1.0 - opts.flat_tol) &&
             inc[m - 2] >= inc[m - 3] * (1.0 - opts.flat_tol) && inc[m - 1] > 0.0) {
    report.verdict = Divergence::diverges;
  }
  return report;
}

// Reach of the w-blocks for a prior: custom priors stop at the double range.
inline DivergenceOptions clamp_for_prior(const RadialPrior& prior, DivergenceOptions opts) {
  if (prior.is_custom()) opts.w_max = std::min(opts.w_max, std::floor(std::log(700.0)));
  return opts;
}

// int_1^inf eta^{p-1} G(eta) H_1^gamma(eta) d eta
inline DivergenceReport properness_index(const RadialPrior& prior, const BetaKernel& kernel,
                                         std::optional<double> gamma = std::nullopt,
                                         const DivergenceOptions& opts = {}) {
  const double g = gamma.value_or(prior.gamma());
  const HSequence h1(kernel, 1.0, QuadratureSpec{1e-14, 1e-11, 2000, {}});
  const double p = prior.dimension();
  return classify_tail_integral(
      [&](double l) { return (p - 1.0) * l + prior.log_value_at_log_eta(l) + g * h1.log_value_at_log_eta(l); },
      clamp_for_prior(prior, opts));
}

// Radial form of the Brown integral with m(g|x) replaced by G:
// int_1^inf c_p eta^{1-p} / G(eta) d eta.
inline DivergenceReport brown_diagnostic(const RadialPrior& prior, const DivergenceOptions& opts = {}) {
  const double p = prior.dimension();
  const double log_cp = log_sphere_surface(p);
  return classify_tail_integral([&](double l) { return log_cp + (1.0 - p) * l - prior.log_value_at_log_eta(l); },
                                clamp_for_prior(prior, opts));
}

// Smallest gamma in {0.25 j : j = 1..8} for which the properness integral converges.
inline std::optional<double> default_gamma(const RadialPrior& prior, const BetaKernel& kernel,
                                           const DivergenceOptions& opts = {}) {
  for (int j = 1; j <= 8; ++j) {
    const double g = 0.25 * j;
    if (properness_index(prior, kernel, g, opts).verdict == Divergence::converges) return g;
  }
  return std::nullopt;
}

struct BlythEntry {
  double i = 1.0;
  double J = 0.0;
};

struct BlythReport {
  std::vector<BlythEntry> entries;
  bool strictly_decreasing = false;
  double last_over_first = 0.0;
};

// J(i) = int_0^inf eta^{p-1} G(eta) H_1^{gamma-2}(eta) H_i'(eta)^2 d eta
inline double blyth_integral(const RadialPrior& prior, const BetaKernel& kernel, double i,
                             std::optional<double> gamma = std::nullopt) {
  const double g = gamma.value_or(prior.gamma());
  const QuadratureSpec inner{1e-15, 1e-12, 2000, {}};
  const HSequence hi(kernel, i, inner);
  const HSequence h1(kernel, 1.0, inner);
  const double p = prior.dimension();
  auto integrand = [&](double eta) {
    if (eta == 0.0) return 0.0;
    const double d = hi.derivative(eta);
    double log_w = (p - 1.0) * std::log(eta) + prior.log_value(eta);
    if (g != 2.0) log_w += (g - 2.0) * std::log(h1.value(eta));
    return std::exp(log_w) * d * d;
  };
  const QuadratureSpec outer{1e-300, 1e-8, 4000, {}};
  const double knee = std::max(1.0, i);
  double total = integrate(integrand, 0.0, 1.0, outer).value;
  if (knee > 1.0) total += integrate(integrand, 1.0, knee, outer).value;
  total += integrate_semi_infinite(integrand, knee, TailDecay::power, outer, knee).value;
  return total;
}

inline BlythReport blyth_decay(const RadialPrior& prior, const BetaKernel& kernel, const std::vector<double>& i_list,
                               std::optional<double> gamma = std::nullopt) {
  BlythReport report;
  for (double i : i_list) report.entries.push_back({i, blyth_integral(prior, kernel, i, gamma)});
  report.strictly_decreasing = true;
  for (std::size_t k = 1; k < report.entries.size(); ++k) {
    if (!(report.entries[k].J < report.entries[k - 1].J)) report.strictly_decreasing = false;
  }
  if (!report.entries.empty() && report.entries.front().J > 0.0) {
    report.last_over_first = report.entries.back().J / report.entries.front().J;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Classification

enum class PriorClass { admissible_certified, inadmissible_certified, uncertified };

inline const char* to_string(PriorClass c) {
  switch (c) {
    case PriorClass::admissible_certified: return "admissible_certified";
    case PriorClass::inadmissible_certified: return "inadmissible_certified";
    case PriorClass::uncertified: return "uncertified";
  }
  return "unknown";
}

struct BoundaryBoundCheck {
  // max over eta >= 1 of G(eta) / (eta^{2-p} T(eta)^2 / (eta beta(eta)))
  double max_ratio = 0.0;
  // slope of log ratio against log eta over the top two decades
  double top_slope = 0.0;
  bool verified = false;
  int kernel_depth = 1;
};

// Checks G(eta) <= C eta^{2-p} T^2 / (eta beta) on [1, 1e12] with a kernel one
// log level deeper than the prior; the constant C is reported, and the bound
// counts as verified when the ratio has stopped growing.
inline BoundaryBoundCheck boundary_bound(const RadialPrior& prior, double slope_tol = 1e-3) {
  BoundaryBoundCheck check;
  check.kernel_depth = prior.log_depth() + 1;
  const BetaKernel kernel = BetaKernel::standard(check.kernel_depth);
  const double p = prior.dimension();
  const auto grid = geometric_grid(1.0, 1e12, 20);
  std::vector<double> lx, ly;
  double max_log = -std::numeric_limits<double>::infinity();
  for (double eta : grid) {
    const double l = std::log(eta);
    const double lxk = kernel.log_x(eta);
    const double log_rhs = (2.0 - p) * l + 2.0 * kernel.log_tail_at(lxk) - l - kernel.log_beta_at(lxk);
    const double log_ratio = prior.log_value(eta) - log_rhs;
    max_log = std::max(max_log, log_ratio);
    if (eta >= 1e10) {
      lx.push_back(l);
      ly.push_back(log_ratio);
    }
  }
  check.max_ratio = std::exp(max_log);
  check.top_slope = fit_slope(lx, ly);
  check.verified = std::isfinite(check.max_ratio) && check.top_slope <= slope_tol;
  return check;
}

struct ClassificationReport {
  PriorClass verdict = PriorClass::uncertified;
  double rv_index = 0.0;
  double tail_s = 0.0;
  bool fg1 = false;
  std::optional<BoundaryBoundCheck> boundary;
  Divergence brown = Divergence::indeterminate;
  std::string reason;
};

// int_0^inf r^{p-1} f(r) G(r) dr < inf, checked by quadrature.
inline bool fg1_check(const RadialPrior& prior, const RadialDensity& model) {
  const double p = prior.dimension();
  if (!(prior.log_deriv(1e-8) > -p)) return false;
  auto integrand = [&](double r) {
    if (r == 0.0) return 0.0;
    return std::exp((p - 1.0) * std::log(r) + model.log_density(r) + prior.log_value(r));
  };
  try {
    const QuadratureSpec spec{1e-300, 1e-8, 4000, {}};
    const double head = integrate(integrand, 0.0, model.scale(), spec).value;
    const double tail = integrate_semi_infinite(integrand, model.scale(), model.tail_decay(), spec, model.scale()).value;
    return std::isfinite(head + tail);
  } catch (const NumericError&) {
    return false;
  }
}

inline ClassificationReport classify_prior(const RadialPrior& prior, const RadialDensity& model,
                                           const DivergenceOptions& opts = {}) {
  ClassificationReport report;
  const double p = prior.dimension();
  report.rv_index = prior.rv_index();
  report.tail_s = model.tail_profile().s;
  report.fg1 = fg1_check(prior, model);
  const double k = report.rv_index;
  const bool boundary_case = std::abs(k - (2.0 - p)) <= (prior.is_custom() ? 1e-3 : 0.0);
  if (report.fg1 && report.tail_s > 3.0) {
    if (!boundary_case && k >= -p && k < 2.0 - p) {
      report.verdict = PriorClass::admissible_certified;
      report.reason = "index in [-p, 2-p) with s > 3 and FG1";
      return report;
    }
    if (boundary_case) {
      report.boundary = boundary_bound(prior);
      if (report.boundary->verified) {
        report.verdict = PriorClass::admissible_certified;
        report.reason = "index 2-p with the boundary growth bound verified, s > 3 and FG1";
        return report;
      }
    }
  }
  report.brown = brown_diagnostic(prior, opts).verdict;
  if (report.brown == Divergence::converges) {
    report.verdict = PriorClass::inadmissible_certified;
    report.reason = "Brown integral converges";
  } else {
    report.reason = std::string("no sufficient condition met; Brown integral ") + to_string(report.brown);
  }
  return report;
}

// ---------------------------------------------------------------------------
// H-sequence property audit

struct HSequenceAudit {
  bool monotone_in_i = true;          // 0 <= H_i <= H_j <= 1 for i < j on the grid
  bool limit_in_i = true;             // 1 - H_i shrinks along the i ladder
  bool scaling_law = true;            // |T/beta H_i - i| / i <= 0.05 at eta_scale
  double scaling_worst = 0.0;
  double eta_scale = 1e6;
  bool derivative_vanishes = true;    // |H_i'(eta)| decreasing along the i ladder at fixed eta
  double vanish_worst = 0.0;          // max over eta of |H'| at the last rung / |H'| at the first
  bool derivative_bound = true;       // |H_i'| < 2 beta / T
  double bound_worst = 0.0;           // max |H_i'| T / (2 beta)
  bool slope_band = false;            // -1 - eps < eta H'/H <= 0 for eta >= eta0
  std::optional<double> eta0;
  double slope_min = 0.0;
  double slope_max = 0.0;
  [[nodiscard]] bool all() const {
    return monotone_in_i && limit_in_i && scaling_law && derivative_vanishes && derivative_bound && slope_band;
  }
};

// Index ladder used for the i -> infinity limits at fixed eta.
inline const std::vector<double>& h_limit_ladder() {
  static const std::vector<double> ladder{1e3, 1e6, 1e9, 1e12};
  return ladder;
}

inline HSequenceAudit audit_h_sequence(const BetaKernel& kernel, const std::vector<double>& i_list,
                                       std::vector<double> grid = {}, double eps = 0.1, double eta_scale = 1e6) {
  if (grid.empty()) grid = geometric_grid(1e-2, 1e6, 2);
  const QuadratureSpec spec{1e-15, 1e-12, 2000, {}};
  std::vector<HSequence> seqs;
  for (double i : i_list) seqs.emplace_back(kernel, i, spec);
  std::vector<HSequence> ladder;
  for (double i : h_limit_ladder()) ladder.emplace_back(kernel, i, QuadratureSpec{1e-15, 1e-10, 2000, {}});
  HSequenceAudit audit;
  audit.eta_scale = eta_scale;
  for (double eta : grid) {
    double prev_h = -1.0;
    const double bound = 2.0 * kernel.value(eta) / kernel.tail(eta);
    for (const auto& s : seqs) {
      const double h = s.value(eta);
      if (h < prev_h || h < 0.0 || h > 1.0) audit.monotone_in_i = false;
      prev_h = h;
      if (eta > 0.0) {
        const double d = std::abs(s.derivative(eta));
        if (!(d < bound)) audit.derivative_bound = false;
        audit.bound_worst = std::max(audit.bound_worst, d / bound);
      }
    }
    if (eta > 0.0 && eta <= 100.0) {
      double prev_gap = 1.0 - prev_h;
      double prev_d = std::numeric_limits<double>::infinity();
      double first_d = 0.0;
      for (const auto& s : ladder) {
        const double gap = 1.0 - s.value(eta);
        if (!(gap <= prev_gap)) audit.limit_in_i = false;
        prev_gap = gap;
        const double d = std::abs(s.derivative(eta));
        if (!(d < prev_d)) audit.derivative_vanishes = false;
        if (first_d == 0.0) first_d = d;
        prev_d = d;
      }
      audit.vanish_worst = std::max(audit.vanish_worst, prev_d / first_d);
    }
  }
  for (const auto& s : seqs) {
    const double ratio = s.n_over_beta(eta_scale);
    const double dev = std::abs(ratio - s.index()) / s.index();
    audit.scaling_worst = std::max(audit.scaling_worst, dev);
  }
  audit.scaling_law = audit.scaling_worst <= 0.05;
  // eta0 search over decades up to 1e8; each candidate is checked on
  // eta0 * 10^{0..4} for every i.
  for (double eta0 = 1.0; eta0 <= 1e8 * 1.0000001; eta0 *= 10.0) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (int dec = 0; dec <= 4; ++dec) {
      const double eta = eta0 * std::pow(10.0, dec);
      for (const auto& s : seqs) {
        const double v = s.log_slope(eta);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    audit.slope_min = lo;
    audit.slope_max = hi;
    if (lo > -1.0 - eps && hi <= 0.0) {
      audit.slope_band = true;
      audit.eta0 = eta0;
      break;
    }
  }
  return audit;
}

}  // namespace sphereshrink
