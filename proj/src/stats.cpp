#include "mzinet/stats.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "mzinet/rng.hpp"

namespace mzinet {

namespace {

void require_nonempty(std::span<const double> x, const char* what) {
  if (x.empty()) throw std::invalid_argument(std::string(what) + ": empty sample");
}

void require_same_size(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) throw std::invalid_argument(std::string(what) + ": samples differ in length");
}

void resample(std::span<const double> src, std::vector<double>& dst, Rng& rng) {
  dst.resize(src.size());
  for (double& v : dst) v = src[rng.below(src.size())];
}

}  // namespace

double mean(std::span<const double> x) {
  require_nonempty(x, "mean");
  // Extended accumulator: the mean of identical values comes back exact.
  long double s = 0.0L;
  for (double v : x) s += v;
  return static_cast<double>(s / static_cast<long double>(x.size()));
}

double variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

double quantile(std::span<const double> x, double q) {
  require_nonempty(x, "quantile");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile: q must be in [0, 1]");
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  require_same_size(a, b, "pearson");
  require_nonempty(a, "pearson");
  const double ma = mean(a), mb = mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sab / std::sqrt(saa * sbb);
}

double spearman(std::span<const double> a, std::span<const double> b) {
  require_same_size(a, b, "spearman");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return pearson(ra, rb);
}

double kolmogorov_q(double lambda) {
  if (lambda <= 0.0) return 1.0;
  // The alternating series converges slowly for small lambda; use the theta
  // function identity there instead.
  if (lambda < 1.18) {
    const double y = std::exp(-std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda));
    double s = 0.0;
    for (int k = 1; k < 50; k += 2) s += std::pow(y, k * k);
    return 1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s;
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  require_nonempty(a, "ks_two_sample");
  require_nonempty(b, "ks_two_sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double m = std::sqrt(na * nb / (na + nb));
  return {d, kolmogorov_q((m + 0.12 + 0.11 / m) * d)};
}

double bootstrap_greater(std::span<const double> a, std::span<const double> b, const Statistic& stat, int resamples,
                         std::uint64_t seed) {
  require_nonempty(a, "bootstrap_greater");
  require_nonempty(b, "bootstrap_greater");
  if (resamples <= 0) throw std::invalid_argument("bootstrap_greater: resamples must be positive");
  Rng rng(seed);
  std::vector<double> ra, rb;
  double wins = 0.0;
  for (int r = 0; r < resamples; ++r) {
    resample(a, ra, rng);
    resample(b, rb, rng);
    const double sa = stat(ra), sb = stat(rb);
    if (sa > sb) wins += 1.0;
    else if (sa == sb) wins += 0.5;
  }
  return wins / resamples;
}

double bootstrap_mean_greater(std::span<const double> a, std::span<const double> b, int resamples, std::uint64_t seed) {
  return bootstrap_greater(a, b, [](std::span<const double> x) { return mean(x); }, resamples, seed);
}

double permutation_p_value(std::span<const double> a, std::span<const double> b, const PairStatistic& stat,
                           int permutations, std::uint64_t seed) {
  require_same_size(a, b, "permutation_p_value");
  if (permutations <= 0) throw std::invalid_argument("permutation_p_value: permutations must be positive");
  const double observed = stat(a, b);
  Rng rng(seed);
  std::vector<double> shuffled(b.begin(), b.end());
  int hits = 0;
  for (int p = 0; p < permutations; ++p) {
    for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
    if (stat(a, shuffled) >= observed) ++hits;
  }
  return (1.0 + hits) / (1.0 + permutations);
}

std::vector<std::size_t> top_k(std::span<const double> x, std::size_t k) {
  if (k > x.size()) throw std::invalid_argument("top_k: k exceeds sample size");
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return x[i] > x[j]; });
  idx.resize(k);
  return idx;
}

double top_k_overlap(std::span<const double> a, std::span<const double> b, std::size_t k) {
  require_same_size(a, b, "top_k_overlap");
  if (k == 0) throw std::invalid_argument("top_k_overlap: k must be positive");
  auto ta = top_k(a, k), tb = top_k(b, k);
  std::sort(ta.begin(), ta.end());
  std::sort(tb.begin(), tb.end());
  std::vector<std::size_t> common;
  std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(), std::back_inserter(common));
  return static_cast<double>(common.size()) / static_cast<double>(k);
}

std::vector<std::size_t> histogram(std::span<const double> x, double lo, double hi, std::size_t bins) {
  if (bins == 0 || !(hi > lo)) throw std::invalid_argument("histogram: need bins > 0 and hi > lo");
  std::vector<std::size_t> counts(bins, 0);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (double v : x) {
    if (!std::isfinite(v)) throw std::invalid_argument("histogram: non-finite value");
    const double pos = std::floor((v - lo) / width);
    const auto b = pos < 0.0 ? std::size_t{0} : std::min(static_cast<std::size_t>(pos), bins - 1);
    ++counts[b];
  }
  return counts;
}

}  // namespace mzinet
