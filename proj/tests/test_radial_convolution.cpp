#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "sphereshrink/radial_convolution.hpp"
#include "test_support.hpp"

using namespace sphereshrink;
using testing_support::Gen;
using testing_support::rel_err;

namespace {

ConvolutionProblem constant_problem(int p, KernelKind kernel, double r) {
  ConvolutionProblem problem;
  problem.p = p;
  problem.kernel = kernel;
  problem.r = r;
  problem.integrand = [](double) { return 1.0; };
  return problem;
}

ConvolutionProblem harmonic_problem(int p, double r) {
  ConvolutionProblem problem;
  problem.p = p;
  problem.r = r;
  problem.singularity_power = 2.0 - p;
  problem.integrand = [p](double s) { return std::pow(s, 2.0 - p); };
  return problem;
}

double cp(int p) { return 2.0 * std::pow(std::numbers::pi, 0.5 * p) / std::tgamma(0.5 * p); }

}  // namespace

TEST(CF, GaussianMatchesSecondMomentOverDimension) {
  for (int p : {3, 4, 5, 8}) {
    const auto g = RadialDensity::normalize(Gaussian{}, p);
    EXPECT_NEAR(c_f(g), 1.0, 1e-10) << p;
  }
}

TEST(CF, MatchesIndependentMoment) {
  for (int p : {3, 5}) {
    for (const auto& model : testing_support::builtin_models(p)) {
      const double want = testing_support::oracle_moment(model, 2.0) / p;
      EXPECT_LT(rel_err(c_f(model), want), 1e-8) << model.id();
    }
  }
}

TEST(CF, NormalizesTailKernel) {
  for (int p : {3, 4, 6}) {
    for (const auto& model : testing_support::builtin_models(p)) {
      const double cf = c_f(model);
      auto integrand = [&](double r) { return std::pow(r, p - 1.0) * model.big_f(r) / cf; };
      const double mass = cp(p) * testing_support::oracle_half_line(integrand, model.scale());
      EXPECT_NEAR(mass, 1.0, 1e-8) << model.id() << " p=" << p;
    }
  }
}

TEST(CF, ScalesQuadraticallyWithScale) {
  Gen gen(41);
  for (int trial = 0; trial < 20; ++trial) {
    const int p = gen.integer(3, 7);
    const PolyExp family{gen.uniform(0.0, 3.0), gen.uniform(0.3, 2.0)};
    const auto base = RadialDensity::normalize(family, p);
    const double sigma = gen.log_uniform(0.1, 10.0);
    const auto scaled = RadialDensity::normalize(family, p, sigma);
    EXPECT_LT(rel_err(c_f(scaled), sigma * sigma * c_f(base)), 1e-9);
  }
}

TEST(RadialExpectation, ConstantIntegrandGivesUnitMass) {
  for (int p : {3, 5}) {
    for (const auto& model : testing_support::builtin_models(p)) {
      for (double r : {0.0, 0.3, 2.0, 15.0}) {
        EXPECT_NEAR(radial_expectation(constant_problem(p, KernelKind::density, r), model), 1.0, 1e-8)
            << model.id() << " r=" << r;
        EXPECT_NEAR(radial_expectation(constant_problem(p, KernelKind::tail_kernel, r), model), 1.0, 1e-8)
            << model.id() << " r=" << r;
      }
    }
  }
}

TEST(RadialExpectation, RejectsBadProblems) {
  const auto g = RadialDensity::normalize(Gaussian{}, 3);
  EXPECT_THROW(radial_expectation(constant_problem(4, KernelKind::density, 1.0), g), std::invalid_argument);
  EXPECT_THROW(radial_expectation(constant_problem(3, KernelKind::density, -1.0), g), std::invalid_argument);
}

// For p = 3, int |theta|^{-1} phi(theta - x) d theta = erf(r / sqrt 2) / r.
TEST(RadialExpectation, HarmonicGaussianClosedFormInThreeDimensions) {
  const auto g = RadialDensity::normalize(Gaussian{}, 3);
  for (double r : {0.05, 0.5, 1.0, 3.0, 10.0, 40.0}) {
    const double want = std::erf(r / std::numbers::sqrt2) / r;
    EXPECT_LT(rel_err(radial_expectation(harmonic_problem(3, r), g), want), 1e-7) << r;
    EXPECT_LT(rel_err(harmonic_marginal(g, r), want), 1e-9) << r;
  }
  EXPECT_LT(rel_err(harmonic_marginal(g, 0.0), std::sqrt(2.0 / std::numbers::pi)), 1e-12);
}

TEST(RadialExpectation, HarmonicClosedFormMatchesQuadratureForAllModels) {
  for (int p : {3, 4, 5, 8}) {
    for (const auto& model : testing_support::builtin_models(p)) {
      for (double r : {0.1, 1.0, 5.0, 20.0}) {
        const double closed = harmonic_marginal(model, r);
        const double oracle = radial_expectation(harmonic_problem(p, r), model);
        EXPECT_LT(rel_err(oracle, closed), 1e-5) << model.id() << " p=" << p << " r=" << r;
      }
    }
  }
}

TEST(RadialExpectation, HarmonicMarginalMatchesIndependentQuadrature) {
  for (int p : {3, 6}) {
    for (const auto& model : testing_support::builtin_models(p)) {
      for (double r : {0.2, 2.0, 12.0}) {
        auto integrand = [&](double t) { return std::pow(t, p - 3.0) * model.big_f(r * t); };
        const double want = cp(p) * (p - 2.0) * testing_support::oracle_integral(integrand, 0.0, 1.0);
        EXPECT_LT(rel_err(harmonic_marginal(model, r), want), 1e-8) << model.id() << " r=" << r;
      }
    }
  }
}

// With sigma = 1 the gaussian has F = f and C_f = 1, so M and m coincide.
TEST(RadialExpectation, GaussianTailKernelEqualsDensityKernel) {
  Gen gen(42);
  for (int trial = 0; trial < 15; ++trial) {
    const int p = gen.integer(3, 8);
    const auto g = RadialDensity::normalize(Gaussian{}, p);
    const double a = gen.uniform(0.1, 2.0);
    const double r = gen.log_uniform(0.05, 20.0);
    auto rho = [a](double s) { return 1.0 / (1.0 + a * s * s); };
    ConvolutionProblem dens = constant_problem(p, KernelKind::density, r);
    dens.integrand = rho;
    const double m = radial_expectation(dens, g);
    const double big_m = kernel_marginal_M(rho, g, r);
    EXPECT_LT(rel_err(big_m, m), 1e-8) << "p=" << p << " r=" << r;
  }
}

TEST(RadialExpectation, MatchesMonteCarloAndIsRotationInvariant) {
  const int p = 4;
  const auto g = RadialDensity::normalize(Gaussian{}, p);
  auto rho = [](double s) { return 1.0 / (1.0 + s * s); };
  Gen gen(43);
  for (double r : {0.5, 2.0, 6.0}) {
    ConvolutionProblem problem = constant_problem(p, KernelKind::density, r);
    problem.integrand = rho;
    const double exact = radial_expectation(problem, g);

    std::vector<double> x1(p, 0.0);
    x1[0] = r;
    std::vector<double> x2 = gen.vector(p);
    double n2 = 0.0;
    for (double v : x2) n2 += v * v;
    for (double& v : x2) v *= r / std::sqrt(n2);

    const int n = 200000;
    double s1 = 0.0, q1 = 0.0, s2 = 0.0, q2 = 0.0;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> z;
    for (int k = 0; k < n; ++k) {
      double a1 = 0.0, a2 = 0.0;
      for (int j = 0; j < p; ++j) {
        const double e = z(rng);
        a1 += (x1[j] + e) * (x1[j] + e);
        a2 += (x2[j] + e) * (x2[j] + e);
      }
      const double v1 = rho(std::sqrt(a1));
      const double v2 = rho(std::sqrt(a2));
      s1 += v1;
      q1 += v1 * v1;
      s2 += v2;
      q2 += v2 * v2;
    }
    const double m1 = s1 / n, m2 = s2 / n;
    const double se1 = std::sqrt((q1 / n - m1 * m1) / n);
    const double se2 = std::sqrt((q2 / n - m2 * m2) / n);
    EXPECT_LT(std::abs(m1 - exact), 4.0 * se1) << r;
    EXPECT_LT(std::abs(m2 - exact), 4.0 * se2) << r;
  }
}

TEST(Marginal, FlatPriorGivesOne) {
  for (int p : {3, 5}) {
    const auto flat = RadialPrior::flat(p);
    for (const auto& model : testing_support::builtin_models(p)) {
      for (double r : {0.0, 1.0, 10.0}) EXPECT_NEAR(marginal_m(flat, model, r), 1.0, 1e-8) << model.id();
    }
  }
}

TEST(Marginal, HarmonicDispatchesToClosedForm) {
  const auto g = RadialDensity::normalize(Gaussian{}, 5);
  const auto prior = RadialPrior::harmonic(5);
  const double oracle = radial_expectation(harmonic_problem(5, 2.0), g);
  EXPECT_LT(rel_err(marginal_m(prior, g, 2.0), oracle), 1e-6);
  EXPECT_DOUBLE_EQ(marginal_m(prior, g, 2.0), harmonic_marginal(g, 2.0));
}

TEST(Marginal, RatioToPriorTendsToOne) {
  const auto model = RadialDensity::normalize(PolyExp{2.0, 1.0}, 4);
  const auto prior = RadialPrior::power(-1.0, 4);
  double prev = 1.0;
  for (double r : {5.0, 20.0, 80.0}) {
    const double dev = std::abs(marginal_m(prior, model, r) / prior.value(r) - 1.0);
    EXPECT_LT(dev, prev) << r;
    prev = dev;
  }
  EXPECT_LT(prev, 1e-3);
}

TEST(Marginal, OriginIntegrabilityFailureIsReported) {
  const auto g = RadialDensity::normalize(Gaussian{}, 3);
  try {
    marginal_m(RadialPrior::power(-3.5, 3), g, 1.0);
    FAIL() << "expected a divergence error";
  } catch (const NumericError& e) {
    EXPECT_EQ(e.kind(), NumericErrorKind::divergence_suspected);
  }
}

TEST(Marginal, TailKernelWithConstantIsOne) {
  for (const auto& model : testing_support::builtin_models(3)) {
    EXPECT_NEAR(kernel_marginal_M([](double) { return 1.0; }, model, 3.0), 1.0, 1e-8) << model.id();
  }
}

TEST(RatioProbe, HarmonicGaussianImprovesGeometrically) {
  const auto probe = asymptotic_ratio_probe(RadialPrior::harmonic(3), RadialDensity::normalize(Gaussian{}, 3),
                                            {10.0, 100.0, 1000.0});
  ASSERT_EQ(probe.rows.size(), 3u);
  const double tol[] = {0.05, 0.005, 0.0005};
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& row = probe.rows[k];
    EXPECT_LT(std::abs(row.m_ratio - 1.0), tol[k]) << row.r;
    EXPECT_LT(std::abs(row.M_ratio - 1.0), tol[k]) << row.r;
    EXPECT_LT(std::abs(row.M_inv_ratio - 1.0), tol[k]) << row.r;
  }
}

// 1 - m/g for the harmonic gaussian at p = 3 is erfc(r / sqrt 2).
TEST(RatioProbe, HarmonicDeficitMatchesErfc) {
  const auto g = RadialDensity::normalize(Gaussian{}, 3);
  for (double r : {1.0, 5.0, 20.0, 35.0}) {
    const double want = std::log(std::erfc(r / std::numbers::sqrt2));
    EXPECT_NEAR(harmonic_log_deficit(g, r), want, 1e-8 * std::abs(want)) << r;
  }
}

TEST(RatioProbe, FlatPriorIsExact) {
  const auto probe =
      asymptotic_ratio_probe(RadialPrior::flat(4), RadialDensity::normalize(MixtureDiff{0.5, 0.5}, 4), {1.0, 10.0});
  for (const auto& row : probe.rows) {
    EXPECT_EQ(row.m_ratio, 1.0);
    EXPECT_EQ(row.M_ratio, 1.0);
  }
}

TEST(RatioProbe, PowerPriorHasPositiveExponent) {
  const auto probe = asymptotic_ratio_probe(RadialPrior::power(-1.0, 4), RadialDensity::normalize(Gaussian{}, 4),
                                            {5.0, 10.0, 20.0, 40.0});
  EXPECT_GT(probe.m_exponent, 0.0);
  EXPECT_GT(probe.M_exponent, 0.0);
  EXPECT_GT(probe.M_inv_exponent, 0.0);
  EXPECT_LT(std::abs(probe.rows.back().m_ratio - 1.0), 1e-2);
}

TEST(RatioProbe, MonotoneApproachForHarmonicGaussian) {
  std::vector<double> radii;
  for (double r = 1.0; r <= 30.0; r *= 1.5) radii.push_back(r);
  const auto probe = asymptotic_ratio_probe(RadialPrior::harmonic(3), RadialDensity::normalize(Gaussian{}, 3), radii);
  for (std::size_t k = 1; k < probe.rows.size(); ++k) {
    EXPECT_LE(probe.rows[k].m_log_dev, probe.rows[k - 1].m_log_dev) << probe.rows[k].r;
  }
}

TEST(RatioProbe, RejectsNonPositiveRadius) {
  EXPECT_THROW(asymptotic_ratio_probe(RadialPrior::harmonic(3), RadialDensity::normalize(Gaussian{}, 3), {0.0}),
               std::invalid_argument);
}
