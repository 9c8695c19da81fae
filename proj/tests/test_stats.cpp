#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "mzinet/rng.hpp"
#include "mzinet/stats.hpp"

using namespace mzinet;

TEST(Stats, MeanVarianceQuantile) {
  const std::vector<double> x{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(mean(x), 2.5);
  EXPECT_DOUBLE_EQ(variance(x), 5.0 / 3.0);
  EXPECT_DOUBLE_EQ(quantile(x, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile(x, 0.2), 1.6);
  EXPECT_DOUBLE_EQ(quantile(x, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile(x, 1.0), 4.0);
  EXPECT_EQ(variance(std::vector<double>{7.0}), 0.0);
  EXPECT_THROW(mean(std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(quantile(x, 1.5), std::invalid_argument);
}

TEST(Stats, MeanOfIdenticalValuesIsExact) {
  const std::vector<double> x(20, 0.952);
  EXPECT_EQ(mean(x), 0.952);
}

TEST(Stats, AverageRanksShareTies) {
  const std::vector<double> x{10, 20, 20, 30, 5};
  EXPECT_EQ(average_ranks(x), (std::vector<double>{2, 3.5, 3.5, 5, 1}));
}

TEST(Stats, CorrelationsMatchReferenceValues) {
  // scipy.stats.spearmanr / pearsonr on the same data.
  const std::vector<double> x{3.1, 1.2, 5.5, 2.2, 4.0, 0.7, 2.2, 6.1};
  const std::vector<double> y{2.0, 1.0, 4.1, 2.9, 3.3, 1.5, 0.2, 5.0};
  EXPECT_NEAR(spearman(x, y), 0.8383383833392812, 1e-12);
  EXPECT_NEAR(pearson(x, y), 0.8604555659625687, 1e-12);
  const std::vector<double> up{1, 2, 3, 4}, down{9, 7, 5, 1};
  EXPECT_DOUBLE_EQ(spearman(up, down), -1.0);
  EXPECT_TRUE(std::isnan(spearman(up, std::vector<double>(4, 1.0))));
}

TEST(Stats, KolmogorovSurvivalMatchesReference) {
  // scipy.special.kolmogorov; both branches of the series are exercised.
  const std::pair<double, double> ref[] = {{0.3, 0.9999906941986655}, {0.5, 0.9639452436648751}, {0.8, 0.5441424115741981},
                                           {1.0, 0.26999967167735456}, {1.18, 0.1234538094297657}, {1.2, 0.11224966667072497},
                                           {1.5, 0.022217962616525127}, {2.0, 0.0006709252557796953}, {3.0, 3.045995948942526e-08}};
  for (const auto& [l, q] : ref) EXPECT_NEAR(kolmogorov_q(l), q, 1e-12 + 1e-10 * q) << l;
  EXPECT_EQ(kolmogorov_q(0.0), 1.0);
}

TEST(Stats, KsTwoSample) {
  const std::vector<double> a{0.1, 0.5, 0.9, 1.3, 2.2, 2.5, 3.1};
  const std::vector<double> b{0.3, 0.35, 0.4, 1.1, 1.2, 1.25, 1.6, 1.7};
  const auto r = ks_two_sample(a, b);
  EXPECT_NEAR(r.statistic, 0.42857142857142855, 1e-15);
  EXPECT_NEAR(r.p_value, 0.3873602400054084, 1e-10);
  const auto same = ks_two_sample(a, a);
  EXPECT_EQ(same.statistic, 0.0);
  EXPECT_EQ(same.p_value, 1.0);
}

TEST(Stats, KsRejectsShiftedUniforms) {
  Rng rng(5);
  std::vector<double> a(2000), b(2000), c(2000);
  for (auto& v : a) v = rng.uniform();
  for (auto& v : b) v = rng.uniform() + 0.2;
  for (auto& v : c) v = rng.uniform();
  EXPECT_LT(ks_two_sample(a, b).p_value, 1e-6);
  EXPECT_GT(ks_two_sample(a, c).p_value, 0.001);
}

TEST(Stats, BootstrapSeparatesAndIsDeterministic) {
  const std::vector<double> lo{0.1, 0.2, 0.15, 0.12, 0.18}, hi{0.9, 0.8, 0.85, 0.95, 0.88};
  EXPECT_EQ(bootstrap_mean_greater(hi, lo, 2000, 1), 1.0);
  EXPECT_EQ(bootstrap_mean_greater(lo, hi, 2000, 1), 0.0);
  const double c = bootstrap_mean_greater(lo, lo, 4000, 2);
  EXPECT_NEAR(c, 0.5, 0.05);
  EXPECT_EQ(c, bootstrap_mean_greater(lo, lo, 4000, 2));
  const auto var = [](std::span<const double> x) { return variance(x); };
  const std::vector<double> wide{-3, 3, -2, 2, -4, 4, 0, 1}, narrow{-0.1, 0.1, 0.0, 0.05, -0.05, 0.02, 0.01, -0.02};
  EXPECT_GT(bootstrap_greater(wide, narrow, var, 2000, 3), 0.99);
}

TEST(Stats, PermutationTest) {
  std::vector<double> a(12), b(12);
  std::iota(a.begin(), a.end(), 0.0);
  std::iota(b.begin(), b.end(), 100.0);
  const auto rho = [](std::span<const double> x, std::span<const double> y) { return spearman(x, y); };
  EXPECT_LT(permutation_p_value(a, b, rho, 999, 4), 0.01);
  Rng rng(9);
  for (auto& v : b) v = rng.normal();
  EXPECT_GT(permutation_p_value(a, b, rho, 999, 4), 0.01);
}

TEST(Stats, TopKOverlap) {
  const std::vector<double> a{5, 4, 3, 2, 1}, b{1, 5, 4, 2, 3};
  EXPECT_EQ(top_k(a, 2), (std::vector<std::size_t>{0, 1}));
  EXPECT_DOUBLE_EQ(top_k_overlap(a, b, 2), 0.5);
  EXPECT_DOUBLE_EQ(top_k_overlap(a, a, 3), 1.0);
  EXPECT_THROW(top_k(a, 6), std::invalid_argument);
}

TEST(Stats, HistogramCountsEverything) {
  const std::vector<double> x{-1.0, 0.0, 0.49, 0.5, 0.99, 1.0, 7.0};
  const auto h = histogram(x, 0.0, 1.0, 2);
  EXPECT_EQ(h, (std::vector<std::size_t>{3, 4}));
  Rng rng(1);
  std::vector<double> u(1000);
  for (auto& v : u) v = rng.uniform(0.0, 6.0);
  const auto hu = histogram(u, 0.0, 6.0, 24);
  EXPECT_EQ(std::accumulate(hu.begin(), hu.end(), std::size_t{0}), u.size());
  EXPECT_THROW(histogram(x, 1.0, 1.0, 2), std::invalid_argument);
}
