#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <cmath>

#include "htspec/rng.hpp"
#include "htspec/tail_law.hpp"
#include "oracles.hpp"

using namespace htspec;

namespace {

double logpower_tail(double t, double alpha, double c, double beta) {
  return std::min(1.0, c * std::pow(std::log(std::exp(1.0) + t), beta) * std::pow(t, -alpha));
}

/// E x^2 by Boost exp-sinh quadrature of 2 t P(|x| > t).
double logpower_second_moment(double alpha, double c, double beta) {
  const double t0 = oracle::bisect_decreasing([&](double t) { return logpower_tail(t, alpha, c, beta); }, 1.0 - 1e-15,
                                              1.0, 1e6);
  boost::math::quadrature::exp_sinh<double> integrator;
  const double tail_part = integrator.integrate(
      [&](double s) { return 2.0 * (t0 + s) * logpower_tail(t0 + s, alpha, c, beta); }, 0.0,
      std::numeric_limits<double>::infinity());
  return std::max(t0, 1.0) * std::max(t0, 1.0) + tail_part;
}

}  // namespace

TEST(Tail, ParetoClosedForm) {
  const TailLaw law(2.0);
  EXPECT_DOUBLE_EQ(tail(law, 10.0), 0.01);
}

TEST(Tail, CappedAtOneBelowSupport) { EXPECT_EQ(tail(TailLaw(2.0), 0.5), 1.0); }

TEST(Tail, LogPowerMatchesDirectFormula) {
  const TailLaw law(3.0, LogPowerSV{1.0, 1.0});
  EXPECT_NEAR(tail(law, 100.0), std::log(std::exp(1.0) + 100.0) * 1e-6, 1e-20);
}

TEST(Tail, NonFiniteArgumentIsRejected) {
  EXPECT_THROW(tail(TailLaw(2.0), std::nan("")), std::domain_error);
  EXPECT_THROW(tail(TailLaw(2.0), INFINITY), std::domain_error);
}

TEST(Tail, IsNonincreasingAndVanishes) {
  const TailLaw law(1.5, LogPowerSV{2.0, 0.5});
  double prev = 1.0;
  for (double t = 0.1; t < 1e8; t *= 1.3) {
    const double g = tail(law, t);
    ASSERT_LE(g, prev);
    prev = g;
  }
  EXPECT_LT(prev, 1e-10);
}

TEST(Tail, ValueAtSupportMin) {
  const TailLaw law(2.0, ConstantSV{0.5}, 2.0);
  EXPECT_DOUBLE_EQ(tail(law, 2.0), 0.5 * 0.25);
}

TEST(Tail, StandardizedTailRefersToRescaledVariable) {
  const TailLaw law = TailLaw::pareto(4.0, true);
  EXPECT_NEAR(law.scale(), std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(tail(law, 10.0), std::pow(10.0 * std::sqrt(2.0), -4.0), 1e-15);
}

TEST(Construction, RejectsInvalidParameters) {
  EXPECT_THROW(TailLaw(0.0), std::invalid_argument);
  EXPECT_THROW(TailLaw(2.0, ConstantSV{0.0}), std::invalid_argument);
  EXPECT_THROW(TailLaw(2.0, ConstantSV{1.0}, 0.0), std::invalid_argument);
}

TEST(Construction, StandardizationNeedsFiniteVariance) {
  EXPECT_THROW(TailLaw::pareto(2.0, true), InfiniteVarianceError);
  EXPECT_THROW(TailLaw::pareto(1.0, true), InfiniteVarianceError);
}

TEST(Quantile, ParetoClosedForm) {
  const TailLaw law(2.0);
  EXPECT_NEAR(quantile_abs(law, 0.01), 10.0, 1e-12);
  EXPECT_DOUBLE_EQ(quantile_abs(law, 1.0), 1.0);
}

TEST(Quantile, LogPowerSolvesTheTailEquation) {
  const TailLaw law(3.0, LogPowerSV{1.0, 1.0});
  const double t = quantile_abs(law, 1e-4);
  EXPECT_LE(std::abs(std::log(std::exp(1.0) + t) * std::pow(t, -3.0) - 1e-4), 1e-16);
  const double ref = oracle::bisect_decreasing([](double x) { return logpower_tail(x, 3.0, 1.0, 1.0); }, 1e-4, 1.0, 1e3);
  EXPECT_NEAR(t, ref, 1e-12 * ref);
}

TEST(Quantile, IsTheSmallestPointWithTailBelowU) {
  for (const TailLaw& law : {TailLaw(1.0), TailLaw(2.5, LogPowerSV{1.0, 2.0}), TailLaw(0.7, LogPowerSV{3.0, -1.0})}) {
    for (double u : {0.9, 0.3, 1e-3, 1e-7}) {
      const double t = quantile_abs(law, u);
      EXPECT_LE(tail(law, t), u);
      if (t > law.support_min()) EXPECT_GT(tail(law, t * (1.0 - 1e-9)), u);
    }
  }
}

TEST(Quantile, RejectsOutOfRange) {
  EXPECT_THROW(quantile_abs(TailLaw(2.0), 0.0), std::domain_error);
  EXPECT_THROW(quantile_abs(TailLaw(2.0), 1.5), std::domain_error);
}

TEST(Variance, ParetoClosedForms) {
  EXPECT_NEAR(variance_unstandardized(TailLaw(4.0)), 2.0, 1e-12);
  EXPECT_NEAR(variance_unstandardized(TailLaw(3.0)), 3.0, 1e-12);
}

TEST(Variance, InfiniteForAlphaAtMostTwo) {
  EXPECT_THROW(variance_unstandardized(TailLaw(2.0)), InfiniteVarianceError);
}

TEST(Variance, LogPowerMatchesIndependentQuadrature) {
  for (auto [alpha, beta] : {std::pair{4.0, 1.0}, std::pair{3.0, -1.0}, std::pair{6.0, 2.0}}) {
    const TailLaw law(alpha, LogPowerSV{1.0, beta});
    const double ref = logpower_second_moment(alpha, 1.0, beta);
    EXPECT_NEAR(variance_unstandardized(law), ref, 1e-9 * ref) << alpha << " " << beta;
  }
}

TEST(Sampling, EmpiricalTailMatchesAtProbePoints) {
  constexpr int kDraws = 1000000;
  for (const TailLaw& law : {TailLaw(2.0), TailLaw(1.0, LogPowerSV{1.0, 1.0}), TailLaw::pareto(5.0, true)}) {
    std::vector<double> probes;
    for (double u : {0.7, 0.2, 0.03, 3e-3, 3e-4}) probes.push_back(quantile_abs(law, u) * 1.01);
    std::vector<int> above(probes.size(), 0);
    IndexStream s(31337, StreamTag::Value);
    for (int k = 0; k < kDraws; ++k) {
      const double x = std::abs(sample_entry(law, s));
      for (std::size_t q = 0; q < probes.size(); ++q) above[q] += x > probes[q];
    }
    for (std::size_t q = 0; q < probes.size(); ++q) {
      const double g = tail(law, probes[q]);
      const double se = std::sqrt(g * (1.0 - g) / kDraws);
      EXPECT_NEAR(static_cast<double>(above[q]) / kDraws, g, 4.0 * se + 1e-12) << law.describe() << " t=" << probes[q];
    }
  }
}

TEST(Sampling, MeanIsZeroBySignSymmetry) {
  const TailLaw law(3.0);
  IndexStream s(5, StreamTag::Value);
  constexpr int kDraws = 1000000;
  double acc = 0.0;
  for (int k = 0; k < kDraws; ++k) acc += sample_entry(law, s);
  EXPECT_NEAR(acc / kDraws, 0.0, 4.0 * std::sqrt(3.0 / kDraws));
}

TEST(Sampling, StandardizedVarianceIsOne) {
  const TailLaw law = TailLaw::pareto(4.0, true);
  IndexStream s(11, StreamTag::Value);
  constexpr int kDraws = 1000000;
  double acc = 0.0;
  for (int k = 0; k < kDraws; ++k) {
    const double x = sample_entry(law, s);
    acc += x * x;
  }
  EXPECT_NEAR(acc / kDraws, 1.0, 0.05);
}
