#pragma once

#include <cstdint>
#include <vector>

namespace mzinet {

/// SplitMix64 finalizer. Used for seeding and for deriving per-trial streams.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the independent stream for `index` under a master seed.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index));
}

/// xoshiro256** with explicit, platform-independent derived distributions.
///
/// Only the bit generator and the transforms below are used for anything that
/// must reproduce across machines; std:: distributions are implementation
/// defined and are deliberately avoided.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Box-Muller, one value per call).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Uniform integer in [0, n), unbiased.
  std::uint64_t below(std::uint64_t n);

  /// Random permutation of [0, n) (Fisher-Yates, descending swap order).
  std::vector<int> permutation(int n);

 private:
  std::uint64_t s_[4];
};

}  // namespace mzinet
