#include <gtest/gtest.h>

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <numbers>

#include "sphereshrink/risk_sim.hpp"
#include "test_support.hpp"

using namespace sphereshrink;
using testing_support::Gen;
using testing_support::rel_err;

namespace {

double chi3_cdf(double r) {
  return std::erf(r / std::numbers::sqrt2) - std::sqrt(2.0 / std::numbers::pi) * r * std::exp(-0.5 * r * r);
}

double radial_weight(const RadialDensity& model, double t) {
  const int p = model.dimension();
  const double cp = 2.0 * std::pow(std::numbers::pi, 0.5 * p) / std::tgamma(0.5 * p);
  return t > 0.0 ? cp * std::exp((p - 1.0) * std::log(t) + model.log_density(t)) : 0.0;
}

double oracle_cdf(const RadialDensity& model, double r) {
  return testing_support::oracle_integral([&](double t) { return radial_weight(model, t); }, 0.0, r);
}

template <class F>
double bisect(F f, double target, double lo, double hi) {
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

RiskConfig config(int samples, std::vector<double> norms, std::uint64_t seed = 11) {
  RiskConfig cfg;
  cfg.samples = samples;
  cfg.theta_norms = std::move(norms);
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST(Sampler, GaussianMedianIsChiThreeMedian) {
  const RadialSampler sampler(RadialDensity::normalize(Gaussian{}, 3));
  const double median = bisect(chi3_cdf, 0.5, 0.0, 10.0);
  EXPECT_NEAR(median, 1.5382, 1e-4);
  EXPECT_NEAR(sampler.radius(0.5), median, 1e-7);
}

TEST(Sampler, QuantilesMatchQuadratureCdf) {
  for (int p : {3, 6}) {
    for (const auto& model : testing_support::builtin_models(p)) {
      const RadialSampler sampler(model);
      EXPECT_NEAR(sampler.total_mass(), 1.0, 1e-8) << model.id();
      for (double u : {1e-4, 0.01, 0.3, 0.5, 0.7, 0.99, 1.0 - 1e-6}) {
        const double r = sampler.radius(u);
        EXPECT_NEAR(oracle_cdf(model, r), u, 1e-8 + 1e-6 * std::min(u, 1.0 - u)) << model.id() << " u=" << u;
      }
    }
  }
}

TEST(Sampler, RadiusIsIncreasingAndStartsAtZero) {
  for (const auto& model : testing_support::builtin_models(4)) {
    const RadialSampler sampler(model);
    double prev = 0.0;
    for (int k = 1; k < 2000; ++k) {
      const double r = sampler.radius(k / 2000.0);
      ASSERT_GT(r, prev) << model.id() << " k=" << k;
      prev = r;
    }
    // below the table the CDF is continued as a power law
    for (double u : {1e-9, 1e-12}) {
      EXPECT_LT(rel_err(oracle_cdf(model, sampler.radius(u)), u), 1e-3) << model.id() << " u=" << u;
    }
    EXPECT_GT(sampler.radius(1e-60), 0.0);
    EXPECT_LT(sampler.radius(1e-60), sampler.radius(1e-30));
    EXPECT_LT(sampler.radius(1e-30), sampler.radius(1e-12));
    EXPECT_EQ(sampler.radius(0.0), 0.0);
  }
}

TEST(Sampler, SecondMomentOfRadius) {
  for (const auto& model : {RadialDensity::normalize(Gaussian{}, 3), RadialDensity::normalize(PolyExp{2.0, 1.0}, 5)}) {
    const RadialSampler sampler(model);
    auto rng = make_stream(3, 0, 0);
    std::uniform_real_distribution<double> unif;
    detail::Moments m;
    for (int k = 0; k < 1000000; ++k) {
      const double r = sampler.radius(unif(rng));
      m.add(r * r);
    }
    EXPECT_LT(std::abs(m.mean - model.moment(2.0)), 4.0 * m.se()) << model.id();
  }
}

TEST(Sampler, KolmogorovSmirnovForBuiltinFamilies) {
  const int n = 100000;
  const double critical = 1.628 / std::sqrt(static_cast<double>(n));  // two-sided, alpha = 0.01
  for (const auto& model : testing_support::builtin_models(3)) {
    const RadialSampler sampler(model);
    auto rng = make_stream(5, 0, 0);
    std::uniform_real_distribution<double> unif;
    std::vector<double> r(n);
    for (double& v : r) v = sampler.radius(unif(rng));
    std::sort(r.begin(), r.end());
    double cdf = 0.0, prev = 0.0, d = 0.0;
    for (int k = 0; k < n; ++k) {
      cdf += boost::math::quadrature::gauss<double, 10>::integrate(
          [&](double t) { return radial_weight(model, t); }, prev, r[k]);
      prev = r[k];
      d = std::max({d, std::abs(cdf - k / static_cast<double>(n)), std::abs(cdf - (k + 1) / static_cast<double>(n))});
    }
    EXPECT_LT(d, critical) << model.id();
  }
}

TEST(Streams, DeterministicAndDistinct) {
  auto a = make_stream(42, 1, 2);
  auto b = make_stream(42, 1, 2);
  auto c = make_stream(42, 1, 3);
  auto d = make_stream(43, 1, 2);
  const auto first_a = a();
  EXPECT_EQ(first_a, b());
  EXPECT_NE(first_a, c());
  EXPECT_NE(first_a, d());
}

TEST(Observations, MeanAndSpreadMatchModel) {
  const auto model = RadialDensity::normalize(MixtureDiff{0.5, 0.5}, 4);
  const RadialSampler sampler(model);
  const std::vector<double> theta = {1.0, -2.0, 0.5, 3.0};
  auto rng = make_stream(9, 0, 0);
  std::vector<detail::Moments> coord(4);
  detail::Moments sq;
  for (int k = 0; k < 1000000; ++k) {
    const auto x = sample_obs(sampler, theta, rng);
    double s = 0.0;
    for (int j = 0; j < 4; ++j) {
      coord[j].add(x[j]);
      s += (x[j] - theta[j]) * (x[j] - theta[j]);
    }
    sq.add(s);
  }
  for (int j = 0; j < 4; ++j) EXPECT_LT(std::abs(coord[j].mean - theta[j]), 4.0 * coord[j].se()) << j;
  EXPECT_LT(std::abs(sq.mean - model.moment(2.0)), 4.0 * sq.se());
}

TEST(Observations, SameStreamGivesSameSequence) {
  const RadialSampler sampler(RadialDensity::normalize(Gaussian{}, 3));
  const std::vector<double> theta = {0.0, 1.0, 0.0};
  auto r1 = make_stream(1, 0, 0);
  auto r2 = make_stream(1, 0, 0);
  for (int k = 0; k < 100; ++k) EXPECT_EQ(sample_obs(sampler, theta, r1), sample_obs(sampler, theta, r2));
}

TEST(Risk, IdentityMatchesBaseline) {
  const auto model = RadialDensity::normalize(PolyExp{2.0, 1.0}, 4);
  const auto curve = estimate_risk(model, RadialEstimator::identity(), config(50000, {0.0, 1.0, 5.0, 20.0}));
  for (const auto& e : curve.entries) {
    EXPECT_NEAR(e.baseline, model.moment(2.0), 1e-12);
    EXPECT_LT(std::abs(e.risk - e.baseline), 3.0 * e.std_error) << e.theta_norm;
    EXPECT_GE(e.std_error, 0.0);
  }
}

TEST(Risk, IdentityMatchesBaselineUnderGeneralLoss) {
  const auto model = RadialDensity::normalize(Gaussian{}, 3);
  RiskConfig cfg = config(60000, {0.0, 3.0});
  Eigen::MatrixXd q(3, 3);
  q << 2.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 3.0;
  cfg.loss_q = q;
  cfg.direction = std::vector<double>{1.0, 1.0, 0.0};
  const auto curve = estimate_risk(model, RadialEstimator::identity(), cfg);
  EXPECT_TRUE(curve.direction_specific);
  for (const auto& e : curve.entries) {
    EXPECT_NEAR(e.baseline, q.trace() * model.moment(2.0) / 3.0, 1e-12);
    EXPECT_LT(std::abs(e.risk - e.baseline), 3.0 * e.std_error) << e.theta_norm;
  }
  EXPECT_FALSE(estimate_risk(model, RadialEstimator::identity(), config(10, {0.0})).direction_specific);
}

TEST(Risk, RejectsInvalidLossAndConfig) {
  const auto model = RadialDensity::normalize(Gaussian{}, 3);
  RiskConfig cfg = config(10, {0.0});
  cfg.loss_q = Eigen::MatrixXd::Identity(4, 4);
  EXPECT_THROW(estimate_risk(model, RadialEstimator::identity(), cfg), std::invalid_argument);
  Eigen::MatrixXd asym = Eigen::MatrixXd::Identity(3, 3);
  asym(0, 1) = 0.3;
  cfg.loss_q = asym;
  EXPECT_THROW(estimate_risk(model, RadialEstimator::identity(), cfg), std::invalid_argument);
  Eigen::MatrixXd indefinite = Eigen::MatrixXd::Identity(3, 3);
  indefinite(2, 2) = -1.0;
  cfg.loss_q = indefinite;
  EXPECT_THROW(estimate_risk(model, RadialEstimator::identity(), cfg), std::invalid_argument);
  cfg.loss_q.reset();
  cfg.samples = 0;
  EXPECT_THROW(estimate_risk(model, RadialEstimator::identity(), cfg), std::invalid_argument);
  cfg.samples = 10;
  cfg.direction = std::vector<double>{0.0, 0.0, 0.0};
  EXPECT_THROW(estimate_risk(model, RadialEstimator::identity(), cfg), std::invalid_argument);
}

TEST(Risk, BitIdenticalAcrossThreadCounts) {
  const auto model = RadialDensity::normalize(MixtureDiff{0.9, 0.5}, 5);
  const auto est = RadialEstimator::harmonic(model);
  RiskConfig cfg = config(30001, {0.0, 2.0, 7.0});
  cfg.block_size = 1000;
  cfg.threads = 1;
  const auto one = estimate_risk(model, est, cfg);
  for (int threads : {2, 3, 8}) {
    cfg.threads = threads;
    const auto many = estimate_risk(model, est, cfg);
    ASSERT_EQ(many.entries.size(), one.entries.size());
    for (std::size_t k = 0; k < one.entries.size(); ++k) {
      EXPECT_EQ(many.entries[k].risk, one.entries[k].risk);
      EXPECT_EQ(many.entries[k].std_error, one.entries[k].std_error);
      EXPECT_EQ(many.entries[k].diff, one.entries[k].diff);
      EXPECT_EQ(many.entries[k].diff_std_error, one.entries[k].diff_std_error);
    }
  }
}

TEST(Risk, HarmonicWinsAtOrigin) {
  const auto model = RadialDensity::normalize(Gaussian{}, 5);
  const auto curve = estimate_risk(model, RadialEstimator::harmonic(model), config(200000, {0.0}));
  const auto& e = curve.entries.front();
  EXPECT_LT(e.diff, 0.0);
  EXPECT_GT(std::abs(e.diff), 3.0 * e.diff_std_error);
  EXPECT_EQ(row_verdict(e), RowVerdict::win);
}

// Far from the origin phi* is at its limit p - 2, so the estimator behaves like
// James-Stein: risk difference about -(p-2)^2 / (|theta|^2 + p - 2). Pairing
// resolves this O(|theta|^-2) gap rather than leaving it within noise of zero.
TEST(Risk, FarFieldGapMatchesJamesSteinAsymptote) {
  const int p = 5;
  const double theta = 50.0;
  const auto model = RadialDensity::normalize(Gaussian{}, p);
  const auto curve = estimate_risk(model, RadialEstimator::harmonic(model), config(200000, {theta}, 42));
  const auto& e = curve.entries.front();
  const double asymptote = -(p - 2.0) * (p - 2.0) / (theta * theta + p - 2.0);
  EXPECT_LT(e.diff, 0.0);
  EXPECT_LT(std::abs(e.diff - asymptote), 4.0 * e.diff_std_error) << e.diff << " vs " << asymptote;
  EXPECT_LT(std::abs(e.diff), 0.01 * e.baseline);
}

TEST(Risk, PairingReducesVariance) {
  const auto model = RadialDensity::normalize(Gaussian{}, 5);
  const auto curve = estimate_risk(model, RadialEstimator::harmonic(model), config(40000, {0.0, 3.0, 10.0}));
  for (const auto& e : curve.entries) EXPECT_LT(e.diff_std_error, e.unpaired_diff_std_error) << e.theta_norm;
}

TEST(Risk, UnpairedRunsUseIndependentBaselineDraws) {
  const auto model = RadialDensity::normalize(Gaussian{}, 3);
  RiskConfig cfg = config(20000, {1.0});
  cfg.paired = false;
  const auto curve = estimate_risk(model, RadialEstimator::identity(), cfg);
  EXPECT_FALSE(curve.paired);
  EXPECT_NE(curve.entries.front().diff, 0.0);
  EXPECT_THROW(dominance_report(curve), std::invalid_argument);
}

TEST(Dominance, IdentityAgainstItselfIsInconclusive) {
  const auto model = RadialDensity::normalize(PolyExp{0.0, 0.5}, 3);
  const auto curve = estimate_risk(model, RadialEstimator::identity(), config(5000, {0.0, 1.0, 10.0}));
  for (const auto& e : curve.entries) {
    EXPECT_EQ(e.diff, 0.0);
    EXPECT_EQ(row_verdict(e), RowVerdict::tie);
  }
  const auto rep = dominance_report(curve);
  EXPECT_EQ(rep.verdict, DominanceKind::inconclusive);
  EXPECT_EQ(rep.describe(), "inconclusive");
}

TEST(Dominance, OverShrinkingEstimatorIsFlagged) {
  const auto model = RadialDensity::normalize(Gaussian{}, 4);
  const auto curve = estimate_risk(model, RadialEstimator::constant(-0.5), config(20000, {10.0}));
  const auto rep = dominance_report(curve);
  EXPECT_EQ(rep.verdict, DominanceKind::violation_at);
  EXPECT_EQ(rep.violation_theta, 10.0);
  EXPECT_NE(rep.describe().find("violation_at"), std::string::npos);
}

TEST(Dominance, HarmonicDominatesOnCertifiedModel) {
  const auto model = RadialDensity::normalize(PolyExp{2.0, 1.0}, 4);
  const auto curve = estimate_risk(model, RadialEstimator::harmonic(model), config(100000, {0.0, 1.0, 3.0}));
  const auto rep = dominance_report(curve);
  EXPECT_EQ(rep.verdict, DominanceKind::dominates);
  EXPECT_GE(rep.wins, 1);
}

TEST(Estimators, GeneralizedBayesWithHarmonicPriorTracksProfile) {
  const auto model = RadialDensity::normalize(Gaussian{}, 4);
  const auto gb = RadialEstimator::generalized_bayes(RadialPrior::harmonic(4), model, 12.0);
  const auto hb = RadialEstimator::harmonic(model);
  for (double r : {0.05, 0.5, 2.0, 8.0}) EXPECT_NEAR(gb.kappa(r), hb.kappa(r), 1e-5) << r;
  const auto a = estimate_risk(model, gb, config(20000, {1.0}));
  const auto b = estimate_risk(model, hb, config(20000, {1.0}));
  EXPECT_NEAR(a.entries.front().risk, b.entries.front().risk, 1e-4);
}
