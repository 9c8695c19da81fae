#pragma once

// Sample statistics and resampling tests used by the experiment harness.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace mzinet {

double mean(std::span<const double> x);
/// Unbiased (n - 1) sample variance; 0 for fewer than two samples.
double variance(std::span<const double> x);
/// Linear interpolation between order statistics, q in [0, 1].
double quantile(std::span<const double> x, double q);

/// 1-based ranks with ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> x);
double pearson(std::span<const double> a, std::span<const double> b);
/// Pearson correlation of the average ranks. NaN when either side is constant.
double spearman(std::span<const double> a, std::span<const double> b);

/// Kolmogorov survival function Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_q(double lambda);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};
/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value
/// Q((sqrt(m) + 0.12 + 0.11 / sqrt(m)) D), m = n1 n2 / (n1 + n2).
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

using Statistic = std::function<double(std::span<const double>)>;

/// Resamples a and b independently with replacement and returns the fraction
/// of resamples with stat(a*) > stat(b*), ties counting one half.
double bootstrap_greater(std::span<const double> a, std::span<const double> b, const Statistic& stat, int resamples,
                         std::uint64_t seed);
double bootstrap_mean_greater(std::span<const double> a, std::span<const double> b, int resamples, std::uint64_t seed);

using PairStatistic = std::function<double(std::span<const double>, std::span<const double>)>;

/// One-sided permutation p-value for stat(a, b) being large: b is shuffled,
/// p = (1 + #{stat(a, b*) >= stat(a, b)}) / (1 + permutations).
double permutation_p_value(std::span<const double> a, std::span<const double> b, const PairStatistic& stat,
                           int permutations, std::uint64_t seed);

/// Indices of the k largest values, ties broken towards the lower index.
std::vector<std::size_t> top_k(std::span<const double> x, std::size_t k);
/// |top_k(a) intersect top_k(b)| / k.
double top_k_overlap(std::span<const double> a, std::span<const double> b, std::size_t k);

/// Equal-width bins on [lo, hi); values outside are clamped into the end bins,
/// so the counts always sum to x.size().
std::vector<std::size_t> histogram(std::span<const double> x, double lo, double hi, std::size_t bins);

}  // namespace mzinet
