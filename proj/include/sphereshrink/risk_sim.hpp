#pragma once

// Monte Carlo risk of radial shrinkage estimators under quadratic loss, with
// common random numbers against the unbiased estimator X.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "sphereshrink/numerics.hpp"
#include "sphereshrink/radial_models.hpp"
#include "sphereshrink/rv_priors.hpp"
#include "sphereshrink/shrinkage.hpp"

namespace sphereshrink {

// Inverse CDF of the radial law with density c_p r^{p-1} f(r). Knots are the
// radii of a geometric grid; log r is interpolated monotonically in
// logit(u), which keeps both the origin and the tail well resolved.
class RadialSampler {
 public:
  explicit RadialSampler(const RadialDensity& model, int knots = 4096) : p_(model.dimension()) {
    const double sigma = model.scale();
    const double cp = sphere_surface(p_);
    auto weight = [&](double t) { return cp * std::pow(t, p_ - 1.0) * model.density(t); };

    // upper end: survival below 1e-15 or the radius cap
    const QuadratureSpec spec{1e-30, 1e-12, 4000, {}};
    double hi = sigma;
    double tail = 1.0;
    for (;;) {
      tail = integrate_semi_infinite(weight, hi, model.tail_decay(), spec, sigma).value;
      if (tail < 1e-15 || hi > 1e8 * sigma) break;
      hi *= 1.5;
    }
    const double lo = 1e-3 * sigma;
    const auto grid = geometric_grid(lo, hi, std::max(8, static_cast<int>(knots / std::log10(hi / lo))));

    std::vector<double> pieces(grid.size());
    pieces[0] = integrate(weight, 0.0, grid[0], spec).value;
    for (std::size_t j = 1; j < grid.size(); ++j) pieces[j] = integrate(weight, grid[j - 1], grid[j], spec).value;

    // cumulative from the left, survival from the right
    std::vector<double> cdf(grid.size()), surv(grid.size());
    double acc = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j) cdf[j] = (acc += pieces[j]);
    acc = tail;
    for (std::size_t j = grid.size(); j-- > 0;) {
      surv[j] = acc;
      acc += pieces[j];
    }
    total_ = cdf.back() + tail;

    std::vector<double> s, lr;
    for (std::size_t j = 0; j < grid.size(); ++j) {
      if (!(cdf[j] > 0.0) || !(surv[j] > 0.0)) continue;
      const double logit = std::log(cdf[j] / total_) - std::log(surv[j] / total_);
      if (!s.empty() && !(logit > s.back())) continue;
      s.push_back(logit);
      lr.push_back(std::log(grid[j]));
    }
    if (s.size() < 4) throw NumericError(NumericErrorKind::divergence_suspected, "radial CDF table has too few knots");
    // local power law at the origin: F_R(r) ~ C r^q
    low_exponent_ = (s[1] - s[0]) / (lr[1] - lr[0]);
    inverse_ = MonotoneCubic(std::move(s), std::move(lr));
  }

  [[nodiscard]] int dimension() const { return p_; }
  // c_p int_0^inf r^{p-1} f(r) dr as tabulated (1 up to quadrature error)
  [[nodiscard]] double total_mass() const { return total_; }

  [[nodiscard]] double radius(double u) const {
    if (!(u > 0.0)) return 0.0;
    if (u >= 1.0) return std::exp(inverse_.upper());
    const double s = std::log(u) - std::log1p(-u);
    if (s < inverse_.lower()) {
      return std::exp(inverse_(inverse_.lower()) + (s - inverse_.lower()) / low_exponent_);
    }
    return std::exp(inverse_(s));
  }

 private:
  int p_ = 3;
  double total_ = 1.0;
  double low_exponent_ = 1.0;
  MonotoneCubic inverse_;
};

inline double sample_radius(const RadialSampler& sampler, double u) { return sampler.radius(u); }

using RngStream = std::mt19937_64;

// Independent stream for (seed, theta index, block index).
inline RngStream make_stream(std::uint64_t seed, std::uint64_t theta_index, std::uint64_t block_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(theta_index), static_cast<std::uint32_t>(block_index),
                    static_cast<std::uint32_t>(block_index >> 32), 0x5eedu};
  return RngStream(seq);
}

// X = theta + R U with U uniform on the sphere (normalized Gaussian vector).
inline std::vector<double> sample_obs(const RadialSampler& sampler, std::span<const double> theta, RngStream& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  std::vector<double> x(theta.size());
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (double& v : x) {
      v = normal(rng);
      n2 += v * v;
    }
  } while (n2 == 0.0);
  const double scale = sampler.radius(unif(rng)) / std::sqrt(n2);
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = theta[j] + scale * x[j];
  return x;
}

enum class EstimatorKind { identity, harmonic_bayes, generalized_bayes, constant };

inline const char* to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::identity: return "identity";
    case EstimatorKind::harmonic_bayes: return "harmonic";
    case EstimatorKind::generalized_bayes: return "generalized_bayes";
    case EstimatorKind::constant: return "constant";
  }
  return "unknown";
}

// delta(x) = kappa(|x|) x
struct RadialEstimator {
  EstimatorKind kind = EstimatorKind::identity;
  std::string label = "identity";
  std::function<double(double)> kappa = [](double) { return 1.0; };

  static RadialEstimator identity() { return {}; }

  static RadialEstimator harmonic(const RadialDensity& model, ProfileOptions opts = {}) {
    auto profile = std::make_shared<const ShrinkageProfile>(ShrinkageProfile::build(model, opts));
    return {EstimatorKind::harmonic_bayes, "harmonic", [profile](double r) { return profile->multiplier(r); }};
  }

  static RadialEstimator generalized_bayes(const RadialPrior& prior, const RadialDensity& model, double r_hi) {
    auto profile = std::make_shared<const MultiplierProfile>(gb_multiplier_profile(prior, model, r_hi));
    return {EstimatorKind::generalized_bayes, "gb:" + prior.id(), [profile](double r) { return (*profile)(r); }};
  }

  static RadialEstimator constant(double c) {
    return {EstimatorKind::constant, "constant(" + std::to_string(c) + ")", [c](double) { return c; }};
  }
};

struct RiskConfig {
  int samples = 100000;
  std::uint64_t seed = 1;
  std::vector<double> theta_norms{0.0};
  std::optional<Eigen::MatrixXd> loss_q;          // identity when empty
  std::optional<std::vector<double>> direction;  // theta direction, e_1 when empty
  bool paired = true;
  int threads = 1;        // 0: hardware concurrency
  int block_size = 4096;  // replicates per RNG stream
};

struct RiskEntry {
  double theta_norm = 0.0;
  double risk = 0.0;
  double std_error = 0.0;
  double baseline = 0.0;
  double diff = 0.0;
  double diff_std_error = 0.0;
  double unpaired_diff_std_error = 0.0;  // se of the difference if the two risks were estimated independently
  double identity_risk = 0.0;
  double identity_std_error = 0.0;
};

struct RiskCurve {
  std::vector<RiskEntry> entries;
  std::uint64_t seed = 0;
  int samples = 0;
  std::string model_id;
  std::string estimator;
  bool paired = true;
  bool direction_specific = false;
};

namespace detail {

// Welford accumulator merged in a fixed order.
struct Moments {
  double n = 0.0, mean = 0.0, m2 = 0.0;
  void add(double v) {
    n += 1.0;
    const double d = v - mean;
    mean += d / n;
    m2 += d * (v - mean);
  }
  void merge(const Moments& o) {
    if (o.n == 0.0) return;
    const double tot = n + o.n;
    const double d = o.mean - mean;
    mean += d * o.n / tot;
    m2 += o.m2 + d * d * n * o.n / tot;
    n = tot;
  }
  [[nodiscard]] double se() const { return n > 1.0 ? std::sqrt(m2 / (n - 1.0) / n) : 0.0; }
};

struct BlockResult {
  Moments est, base, diff;
};

inline bool is_scalar_matrix(const Eigen::MatrixXd& q) {
  const double d = q(0, 0);
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
      if (q(i, j) != (i == j ? d : 0.0)) return false;
    }
  }
  return true;
}

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace detail

inline RiskCurve estimate_risk(const RadialDensity& model, const RadialEstimator& estimator, const RiskConfig& config,
                               const RadialSampler* sampler_in = nullptr) {
  const int p = model.dimension();
  if (config.samples < 1) throw std::invalid_argument("risk: samples must be >= 1");
  if (config.block_size < 1) throw std::invalid_argument("risk: block_size must be >= 1");
  const Eigen::MatrixXd q = config.loss_q.value_or(Eigen::MatrixXd::Identity(p, p));
  if (q.rows() != p || q.cols() != p) throw std::invalid_argument("risk: loss matrix must be p x p");
  if (!q.isApprox(q.transpose(), 0.0)) throw std::invalid_argument("risk: loss matrix must be symmetric");
  if (Eigen::LLT<Eigen::MatrixXd>(q).info() != Eigen::Success) {
    throw std::invalid_argument("risk: loss matrix must be positive definite");
  }
  Eigen::VectorXd dir = Eigen::VectorXd::Unit(p, 0);
  if (config.direction) {
    if (static_cast<int>(config.direction->size()) != p) throw std::invalid_argument("risk: direction must have length p");
    dir = Eigen::Map<const Eigen::VectorXd>(config.direction->data(), p);
    if (!(dir.norm() > 0.0)) throw std::invalid_argument("risk: direction must be nonzero");
    dir.normalize();
  }

  std::optional<RadialSampler> own;
  if (!sampler_in) own.emplace(model);
  const RadialSampler& sampler = sampler_in ? *sampler_in : *own;

  RiskCurve curve;
  curve.seed = config.seed;
  curve.samples = config.samples;
  curve.model_id = model.id();
  curve.estimator = estimator.label;
  curve.paired = config.paired;
  curve.direction_specific = !detail::is_scalar_matrix(q);

  const double baseline = q.trace() * model.moment(2.0) / p;
  const int blocks = (config.samples + config.block_size - 1) / config.block_size;
  const std::size_t n_theta = config.theta_norms.size();
  std::vector<detail::BlockResult> results(n_theta * static_cast<std::size_t>(blocks));

  auto run_block = [&](std::size_t task) {
    const std::size_t ti = task / blocks;
    const int b = static_cast<int>(task % blocks);
    const Eigen::VectorXd theta = config.theta_norms[ti] * dir;
    const int count = std::min(config.block_size, config.samples - b * config.block_size);
    // the baseline draws come from an independent stream when pairing is off
    RngStream rng = make_stream(config.seed, ti, static_cast<std::uint64_t>(b));
    RngStream rng_base = make_stream(config.seed ^ 0x9e3779b97f4a7c15ULL, ti, static_cast<std::uint64_t>(b));
    std::vector<double> th(theta.data(), theta.data() + p);
    detail::BlockResult out;
    Eigen::VectorXd err(p), err0(p);
    for (int k = 0; k < count; ++k) {
      const auto x = sample_obs(sampler, th, rng);
      const Eigen::Map<const Eigen::VectorXd> xv(x.data(), p);
      const double kappa = estimator.kappa(xv.norm());
      err = kappa * xv - theta;
      const double loss = err.dot(q * err);
      double loss0;
      if (config.paired) {
        err0 = xv - theta;
      } else {
        const auto x0 = sample_obs(sampler, th, rng_base);
        err0 = Eigen::Map<const Eigen::VectorXd>(x0.data(), p) - theta;
      }
      loss0 = err0.dot(q * err0);
      out.est.add(loss);
      out.base.add(loss0);
      out.diff.add(loss - loss0);
    }
    results[task] = out;
  };

  const std::size_t tasks = results.size();
  const int nthreads = std::min<int>(detail::resolve_threads(config.threads), static_cast<int>(std::max<std::size_t>(tasks, 1)));
  if (nthreads <= 1) {
    for (std::size_t t = 0; t < tasks; ++t) run_block(t);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(nthreads);
    for (int w = 0; w < nthreads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t t = w; t < tasks; t += nthreads) run_block(t);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  for (std::size_t ti = 0; ti < n_theta; ++ti) {
    detail::BlockResult acc;
    for (int b = 0; b < blocks; ++b) {
      const auto& r = results[ti * blocks + b];
      acc.est.merge(r.est);
      acc.base.merge(r.base);
      acc.diff.merge(r.diff);
    }
    RiskEntry e;
    e.theta_norm = config.theta_norms[ti];
    e.risk = acc.est.mean;
    e.std_error = acc.est.se();
    e.baseline = baseline;
    e.identity_risk = acc.base.mean;
    e.identity_std_error = acc.base.se();
    e.diff = acc.diff.mean;
    e.diff_std_error = acc.diff.se();
    e.unpaired_diff_std_error = std::hypot(e.std_error, e.identity_std_error);
    curve.entries.push_back(e);
  }
  return curve;
}

enum class RowVerdict { win, tie, loss };

inline const char* to_string(RowVerdict v) {
  switch (v) {
    case RowVerdict::win: return "win";
    case RowVerdict::tie: return "tie";
    case RowVerdict::loss: return "loss";
  }
  return "unknown";
}

inline constexpr double kSigmaRule = 3.0;

inline RowVerdict row_verdict(const RiskEntry& e) {
  if (e.diff - kSigmaRule * e.diff_std_error > 0.0) return RowVerdict::loss;
  if (e.diff + kSigmaRule * e.diff_std_error < 0.0) return RowVerdict::win;
  return RowVerdict::tie;
}

enum class DominanceKind { dominates, violation_at, inconclusive };

struct DominanceReport {
  DominanceKind verdict = DominanceKind::inconclusive;
  double violation_theta = std::numeric_limits<double>::quiet_NaN();
  int wins = 0;

  [[nodiscard]] std::string describe() const {
    switch (verdict) {
      case DominanceKind::dominates: return "dominates";
      case DominanceKind::violation_at: return "violation_at(" + std::to_string(violation_theta) + ")";
      case DominanceKind::inconclusive: return "inconclusive";
    }
    return "unknown";
  }
};

inline DominanceReport dominance_report(const RiskCurve& curve) {
  if (!curve.paired) throw std::invalid_argument("dominance_report needs paired sampling");
  DominanceReport rep;
  for (const auto& e : curve.entries) {
    const auto v = row_verdict(e);
    if (v == RowVerdict::loss) {
      rep.verdict = DominanceKind::violation_at;
      rep.violation_theta = e.theta_norm;
      return rep;
    }
    if (v == RowVerdict::win) ++rep.wins;
  }
  rep.verdict = rep.wins > 0 ? DominanceKind::dominates : DominanceKind::inconclusive;
  return rep;
}

}  // namespace sphereshrink
