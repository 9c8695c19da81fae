#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mzinet/decompose.hpp"
#include "mzinet/imprecision.hpp"

namespace mzinet {
namespace {

using std::numbers::pi;

UnitaryMesh random_grid(int n, std::uint64_t seed) { return build_layout({LayoutKind::grid, 0}, n, ParamsInit::uniform_random, seed); }

// Flattens theta, phi per MZI then output phases, matching the draw order.
std::vector<double> phases_of(const UnitaryMesh& m) {
  std::vector<double> v;
  for (const auto& l : m.layers)
    for (const auto& z : l.mzis) {
      v.push_back(z.params.theta);
      v.push_back(z.params.phi);
    }
  v.insert(v.end(), m.output_phases.begin(), m.output_phases.end());
  return v;
}

TEST(PerturbPhases, ZeroSigmaIsIdentity) {
  const auto m = random_grid(8, 1);
  Rng rng(2);
  EXPECT_EQ(perturb_phases(m, 0.0, rng), m);
  DiagonalLayer d{{0.1, 0.2}, 1.5};
  EXPECT_EQ(perturb_phases(d, 0.0, rng), d);
}

TEST(PerturbPhases, InjectedDeltasHaveRequestedMoments) {
  // grid n = 100 has 4950 MZIs: 9900 phases + 100 screen phases.
  const auto m = random_grid(100, 3);
  Rng rng(4);
  const auto p = perturb_phases(m, 0.01, rng);
  const auto a = phases_of(m), b = phases_of(p);
  ASSERT_EQ(a.size(), 10000u);
  double sum = 0.0, sq = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = b[k] - a[k];
    sum += d;
    sq += d * d;
  }
  const double mean = sum / 1e4;
  const double sd = std::sqrt(sq / 1e4 - mean * mean);
  EXPECT_LT(std::abs(mean), 3 * 0.01 / 100.0);
  EXPECT_NEAR(sd, 0.01, 0.05 * 0.01);
}

TEST(PerturbPhases, DeterministicAndIndependentOfOtherMeshes) {
  const auto a = random_grid(8, 5), b = random_grid(8, 6);
  Rng r1(7), r2(7), r3(8);
  const auto pa = perturb_phases(a, 0.1, r1);
  // Interleave work on b using a different stream; a's result must not move.
  const auto pb = perturb_phases(b, 0.1, r3);
  const auto pa2 = perturb_phases(a, 0.1, r2);
  EXPECT_EQ(pa, pa2);
  EXPECT_EQ(b, random_grid(8, 6));
  EXPECT_NE(pb, b);
}

TEST(PerturbPhases, PreservesUnitarity) {
  Rng rng(9);
  EXPECT_LT(unitarity_error(mesh_transfer(perturb_phases(random_grid(16, 1), 0.5, rng))), 1e-10);
}

TEST(PerturbSplitters, ZeroSigmaIsIdentity) {
  const auto m = random_grid(8, 1);
  Rng rng(2);
  EXPECT_EQ(perturb_splitters(m, 0.0, rng), m);
}

TEST(PerturbSplitters, NoClampsAtPercentLevel) {
  // 50 grids of n = 64 give 50 * 2016 * 2 > 1e5 splitters.
  std::size_t clamps = 0, splitters = 0;
  Rng rng(10);
  const auto m = build_layout({LayoutKind::grid, 0}, 64);
  for (int k = 0; k < 50; ++k) {
    perturb_splitters(m, 0.01, rng, &clamps);
    splitters += 2 * m.mzi_count();
  }
  EXPECT_GE(splitters, 100000u);
  EXPECT_EQ(clamps, 0u);
}

TEST(PerturbSplitters, ClampsPathologicalSigmaAndStaysUnitary) {
  std::size_t clamps = 0;
  Rng rng(11);
  const auto p = perturb_splitters(random_grid(16, 2), 1.0, rng, &clamps);
  EXPECT_GT(clamps, 0u);
  for (const auto& l : p.layers)
    for (const auto& z : l.mzis) {
      EXPECT_LE(std::abs(z.params.dt1), 0.5);
      EXPECT_LE(std::abs(z.params.dt2), 0.5);
    }
  EXPECT_LT(unitarity_error(mesh_transfer(p)), 1e-10);
}

TEST(PerturbMesh, CombinedNoiseIsUnitaryAndSeeded) {
  const auto m = random_grid(12, 3);
  Rng r1(5), r2(5);
  const auto a = perturb_mesh(m, 0.02, 0.02, r1);
  EXPECT_EQ(a, perturb_mesh(m, 0.02, 0.02, r2));
  EXPECT_LT(unitarity_error(mesh_transfer(a)), 1e-10);
}

TEST(PerturbBlock, EmptyBlockIsIdentity) {
  const auto m = random_grid(8, 1);
  Rng rng(1);
  EXPECT_EQ(perturb_block(m, BlockSpec{0, 2, 2, 0, 8, 0.1}, rng), m);
}

TEST(PerturbBlock, WholeMeshMatchesPerturbPhases) {
  const auto m = random_grid(10, 4);
  Rng r1(12), r2(12);
  const BlockSpec all{0, 0, static_cast<int>(m.layers.size()) + 1, 0, m.n, 0.1};
  EXPECT_EQ(perturb_block(m, all, r1), perturb_phases(m, 0.1, r2));
}

TEST(PerturbBlock, TouchesExactlyTheWindow) {
  const auto m = random_grid(8, 4);
  Rng rng(13);
  // Layers 2, 3; top waveguides 2, 3. Layer 2 pairs start at even tops,
  // layer 3 at odd tops, so the window holds (2, 2) and (3, 3).
  const BlockSpec b{0, 2, 4, 2, 4, 0.1};
  const auto p = perturb_block(m, b, rng);
  int changed_theta = 0, changed_other = 0;
  for (std::size_t l = 0; l < m.layers.size(); ++l)
    for (std::size_t k = 0; k < m.layers[l].mzis.size(); ++k) {
      const auto& z0 = m.layers[l].mzis[k];
      const auto& z1 = p.layers[l].mzis[k];
      const bool inside = l >= 2 && l < 4 && z0.top >= 2 && z0.top < 4;
      if (z0.params.theta != z1.params.theta) (inside ? changed_theta : changed_other)++;
      if (!inside && z0.params.phi != z1.params.phi) ++changed_other;
    }
  EXPECT_EQ(changed_theta, 2);
  EXPECT_EQ(changed_other, 0);
  EXPECT_EQ(p.output_phases, m.output_phases);
}

TEST(PerturbBlock, RejectsOutOfRange) {
  const auto m = random_grid(8, 4);
  Rng rng(1);
  EXPECT_THROW(perturb_block(m, BlockSpec{0, 0, 20, 0, 4, 0.1}, rng), std::out_of_range);
  EXPECT_THROW(perturb_block(m, BlockSpec{0, 0, 2, 0, 9, 0.1}, rng), std::out_of_range);
}

TEST(Quantize, Examples) {
  for (int b : {1, 4, 10}) EXPECT_EQ(quantize_phase(0.0, b), 0.0);
  EXPECT_EQ(quantize_phase(pi / 2, 4), pi / 2);
  // Enumerate all 16 levels and pick the nearest by brute force.
  const double target = 2 * pi - 1e-9;
  double best = 0.0;
  for (int i = 0; i < 16; ++i) {
    const double level = 2 * pi * (i / 16.0) * (i / 16.0);
    if (std::abs(level - target) < std::abs(best - target)) best = level;
  }
  EXPECT_DOUBLE_EQ(best, 2 * pi * (15.0 / 16) * (15.0 / 16));
  EXPECT_DOUBLE_EQ(quantize_phase(target, 4), best);
}

TEST(Quantize, NearestLevelMatchesBruteForce) {
  Rng rng(3);
  for (int b : {2, 4, 7}) {
    const int levels = 1 << b;
    for (int k = 0; k < 500; ++k) {
      const double x = rng.uniform(-10, 10);
      const double w = std::fmod(std::fmod(x, 2 * pi) + 2 * pi, 2 * pi);
      double best = 0.0;
      for (int i = 0; i < levels; ++i) {
        const double level = 2 * pi * std::pow(static_cast<double>(i) / levels, 2);
        if (std::abs(level - w) < std::abs(best - w)) best = level;
      }
      EXPECT_NEAR(quantize_phase(x, b), best, 1e-12);
    }
  }
}

TEST(Quantize, Idempotent) {
  const auto m = random_grid(8, 8);
  for (int b : {3, 6, 10}) {
    const auto q = quantize_phases(m, b);
    EXPECT_EQ(quantize_phases(q, b), q);
    const DiagonalLayer d{{0.3, 2.0, 6.1}, 1.0};
    EXPECT_EQ(quantize_phases(quantize_phases(d, b), b), quantize_phases(d, b));
  }
}

TEST(Quantize, FineGridConvergesToOriginal) {
  const auto m = random_grid(8, 8);
  const auto q = quantize_phases(m, 24);
  EXPECT_GT(fidelity(mesh_transfer(m), mesh_transfer(q)), 1.0 - 1e-9);
}

TEST(LaserNoise, Values) {
  EXPECT_EQ(laser_phase_sigma(0.0, 1e-4), 0.0);
  EXPECT_NEAR(laser_phase_sigma(5e7, 1e-4), 0.01, 0.001);
  EXPECT_NEAR(laser_phase_sigma(3e5, 1e-4), std::sqrt(2 * pi * 3e5 * 1e-4 / 299792458.0), 1e-15);
  EXPECT_NEAR(laser_phase_sigma(3e5, 1e-4), 7.93e-4, 1e-5);
}

TEST(NoiseSpec, Validation) {
  EXPECT_NO_THROW((NoiseSpec{0.01, 0.01, 8, std::nullopt, 1}.validate()));
  EXPECT_THROW((NoiseSpec{-0.1, 0.0, std::nullopt, std::nullopt, 1}.validate()), std::invalid_argument);
  EXPECT_THROW((NoiseSpec{0.0, NAN, std::nullopt, std::nullopt, 1}.validate()), std::invalid_argument);
  EXPECT_THROW((NoiseSpec{0.0, 0.0, 0, std::nullopt, 1}.validate()), std::invalid_argument);
}

}  // namespace
}  // namespace mzinet
