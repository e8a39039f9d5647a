#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "htspec/stats.hpp"

using namespace htspec;

namespace {
double identity_cdf(double x) { return std::clamp(x, 0.0, 1.0); }
}  // namespace

TEST(Ecdf, RightContinuousSteps) {
  const Ecdf f({3.0, 1.0, 2.0, 2.0});
  EXPECT_EQ(f(0.5), 0.0);
  EXPECT_EQ(f(1.0), 0.25);
  EXPECT_EQ(f(2.0), 0.75);
  EXPECT_EQ(f(2.5), 0.75);
  EXPECT_EQ(f(3.0), 1.0);
  EXPECT_EQ(f.sorted_samples().front(), 1.0);
  EXPECT_THROW(Ecdf({}), std::invalid_argument);
}

TEST(Ks, SingleSample) { EXPECT_DOUBLE_EQ(ks_statistic(std::vector<double>{0.5}, identity_cdf), 0.5); }

TEST(Ks, TwoSamples) { EXPECT_DOUBLE_EQ(ks_statistic(std::vector<double>{0.25, 0.75}, identity_cdf), 0.25); }

TEST(Ks, RejectsNonFinite) {
  EXPECT_THROW(ks_statistic(std::vector<double>{NAN}, identity_cdf), std::invalid_argument);
  EXPECT_THROW(ks_statistic(std::vector<double>{}, identity_cdf), std::invalid_argument);
}

TEST(Ks, SelfDistanceAgainstEcdfIsZero) {
  std::mt19937_64 g(61);
  std::normal_distribution<double> z;
  std::vector<double> x(500);
  for (double& v : x) v = z(g);
  EXPECT_EQ(ks_statistic(x, Ecdf(x)), 0.0);
}

TEST(Ks, InvariantUnderMonotoneTransform) {
  std::mt19937_64 g(62);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(300), y(300);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = u(g);
    y[i] = std::exp(3.0 * x[i]);
  }
  const double a = ks_statistic(x, identity_cdf);
  const double b = ks_statistic(y, [](double t) { return identity_cdf(std::log(t) / 3.0); });
  EXPECT_NEAR(a, b, 1e-14);
}

TEST(Ks, NullDistributionFrequency) {
  std::mt19937_64 g(63);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int within = 0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    std::vector<double> x(10000);
    for (double& v : x) v = u(g);
    within += ks_statistic(x, identity_cdf) <= ks_critical_95(x.size());
  }
  EXPECT_GE(within, static_cast<int>(0.9 * reps));
}

TEST(PoissonCount, NoPointsAbove) {
  const std::vector<std::vector<double>> pts{{0.1, 0.2}};
  const std::vector<double> thr{1.0};
  const auto r = poisson_count_test(pts, thr, 1.0, IntensityKind::Covariance);
  EXPECT_EQ(r[0].observed_mean, 0.0);
  EXPECT_EQ(r[0].expected, 1.0);
  EXPECT_EQ(count_above(pts[0], 1.0), 0u);
}

TEST(PoissonCount, EmptyThresholdsRejected) {
  const std::vector<std::vector<double>> pts{{1.0}};
  EXPECT_THROW(poisson_count_test(pts, std::vector<double>{}, 1.0, IntensityKind::Covariance), std::invalid_argument);
}

TEST(PoissonCount, SyntheticProcessGivesSmallZScores) {
  // Points of the limiting process above x_min: count ~ Poisson(x_min^(-a/2)),
  // each point x_min U^(-2/a).
  std::mt19937_64 g(64);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double alpha = 1.0, xmin = 0.5;
  const std::vector<double> thresholds{0.5, 1.0, 2.0, 4.0};
  int good = 0, total = 0;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<std::vector<double>> reps(200);
    std::poisson_distribution<int> count(std::pow(xmin, -alpha / 2.0));
    for (auto& pts : reps) {
      const int k = count(g);
      for (int q = 0; q < k; ++q) pts.push_back(xmin * std::pow(1.0 - u(g), -2.0 / alpha));
    }
    for (const auto& r : poisson_count_test(reps, thresholds, alpha, IntensityKind::Covariance)) {
      good += std::abs(r.z_score) <= 4.0;
      ++total;
    }
  }
  EXPECT_GE(good, static_cast<int>(0.99 * total));
}

TEST(Esd, SingleOccupiedBin) {
  const std::vector<double> spec(10, 4.0 * 3.0);
  const auto h = esd(spec, 3.0, 30, 1.0);
  int occupied = 0;
  for (auto c : h.counts) occupied += c > 0;
  EXPECT_EQ(occupied, 1);
}

TEST(Esd, CountsSumToSpectrumSize) {
  std::mt19937_64 g(65);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::vector<double> spec(321);
  for (double& v : spec) v = u(g);
  const auto h = esd(spec, 1.0, 17, 0.5);
  std::size_t total = 0;
  for (auto c : h.counts) total += c;
  EXPECT_EQ(total, spec.size());
  EXPECT_EQ(h.edges.size(), 18u);
  std::ostringstream os;
  h.write_csv(os);
  EXPECT_EQ(os.str().substr(0, 19), "bin_lo,bin_hi,count");
}

TEST(Esd, KsAgainstMpForMpDistributedValues) {
  // Deterministic quantiles of MP(1) are at KS distance <= 1/n.
  std::vector<double> spec;
  const int n = 400;
  for (int k = 0; k < n; ++k) {
    const double target = (k + 0.5) / n;
    double lo = 0.0, hi = 4.0;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      (mp_cdf(mid, 1.0) < target ? lo : hi) = mid;
    }
    spec.push_back(0.5 * (lo + hi));
  }
  EXPECT_LE(esd(spec, 1.0, 20, 1.0).ks_to_mp, 1.0 / n + 1e-9);
}

TEST(Esd, RejectsBadScale) {
  EXPECT_THROW(esd(std::vector<double>{1.0}, 0.0, 10, 1.0), std::invalid_argument);
}

TEST(Concentration, Cases) {
  const std::vector<std::size_t> exact(50, 100);
  EXPECT_TRUE(concentration_check(exact, 10000, 0.01, 1e-12));
  const std::vector<std::size_t> doubled(50, 200);
  EXPECT_FALSE(concentration_check(doubled, 10000, 0.01, 0.5));
  std::mt19937_64 g(66);
  std::binomial_distribution<std::size_t> b(10000, 0.01);
  std::vector<std::size_t> counts(100);
  for (auto& c : counts) c = b(g);
  EXPECT_TRUE(concentration_check(counts, 10000, 0.01, 0.5));
}

TEST(Concentration, MonotoneInEta) {
  const std::vector<std::size_t> counts{90, 130};
  bool prev = false;
  for (double eta = 0.01; eta < 1.0; eta += 0.01) {
    const bool now = concentration_check(counts, 10000, 0.01, eta);
    EXPECT_TRUE(!prev || now);
    prev = now;
  }
}

TEST(Collisions, Cases) {
  const auto small = SparseMatrix::from_triplets(3, 3, {{0, 0, 1.0}, {1, 1, 2.0}});
  const auto none = large_entry_collision_scan(small, 5.0);
  EXPECT_EQ(none.row_collisions, 0u);
  EXPECT_EQ(none.col_collisions, 0u);
  const auto planted = SparseMatrix::from_triplets(3, 3, {{1, 0, 10.0}, {1, 2, -12.0}, {0, 1, 1.0}});
  const auto s = large_entry_collision_scan(planted, 5.0);
  EXPECT_EQ(s.row_collisions, 1u);
  EXPECT_EQ(s.col_collisions, 0u);
}

TEST(TestRecord, Json) {
  const TestRecord r{"median_ratio", 1.02, 1.0, 0.1, true};
  const auto j = r.to_json();
  EXPECT_EQ(j.at("name"), "median_ratio");
  EXPECT_EQ(j.at("pass"), true);
  EXPECT_EQ(j.size(), 5u);
}
