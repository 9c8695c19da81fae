#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mzinet/mesh.hpp"
#include "test_support.hpp"

namespace mzinet {
namespace {

using std::numbers::pi;
using testing::expect_matrix_near;

constexpr cdouble kI{0.0, 1.0};

// The four factors written out independently of the library.
CMatrix bs(double r) {
  const double t = std::sqrt(1.0 - r * r);
  return CMatrix{{r, kI * t}, {kI * t, r}};
}
CMatrix ps(double a) { return CMatrix{{std::polar(1.0, a), 0.0}, {0.0, 1.0}}; }

cdouble det2(const CMatrix& m) { return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0); }

TEST(MziTransfer, CrossStateAtThetaZero) {
  expect_matrix_near(mzi_transfer_ideal(0.0, 0.0), CMatrix{{0.0, kI}, {kI, 0.0}}, 1e-15);
}

TEST(MziTransfer, BarStateAtThetaPi) {
  expect_matrix_near(mzi_transfer_ideal(pi, 0.0), CMatrix{{-1.0, 0.0}, {0.0, 1.0}}, 1e-15);
}

TEST(MziTransfer, IdealIsUnitary) { EXPECT_LT(unitarity_error(mzi_transfer_ideal(0.9, 1.3)), 1e-14); }

TEST(MziTransfer, FullReducesToIdealForBalancedSplitters) {
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    const double theta = rng.uniform(0, 2 * pi);
    const double phi = rng.uniform(0, 2 * pi);
    expect_matrix_near(mzi_transfer_full({theta, phi, 0.0, 0.0}), mzi_transfer_ideal(theta, phi), 1e-14);
  }
}

TEST(MziTransfer, FullMatchesFourFactorProduct) {
  const MziParams p{0.8, 2.1, 0.5, -0.13};
  const CMatrix expected =
      testing::naive_product(testing::naive_product(bs(std::sqrt(0.5 + p.dt1)), ps(p.theta)), testing::naive_product(bs(std::sqrt(0.5 + p.dt2)), ps(p.phi)));
  expect_matrix_near(mzi_transfer_full(p), expected, 1e-14);
}

TEST(MziTransfer, FullHasUnitDeterminant) {
  Rng rng(4);
  for (int k = 0; k < 100; ++k) {
    const MziParams p{rng.uniform(0, 2 * pi), rng.uniform(0, 2 * pi), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
    EXPECT_NEAR(std::abs(det2(mzi_transfer_full(p))), 1.0, 1e-12);
    EXPECT_LT(unitarity_error(mzi_transfer_full(p)), 1e-13);
  }
}

TEST(MziTransfer, RejectsTransmittanceOutOfRange) {
  EXPECT_THROW(mzi_transfer_full({0.0, 0.0, 0.6, 0.0}), std::invalid_argument);
  EXPECT_THROW(mzi_transfer_full({0.0, 0.0, 0.0, -0.51}), std::invalid_argument);
}

TEST(BuildLayout, GridCounts) {
  const auto m = build_layout({LayoutKind::grid, 0}, 4);
  EXPECT_EQ(m.layers.size(), 4u);
  EXPECT_EQ(m.mzi_count(), 6u);
  EXPECT_EQ(build_layout({LayoutKind::grid, 0}, 2).mzi_count(), 1u);
  for (int n : {3, 5, 8, 17}) EXPECT_EQ(build_layout({LayoutKind::grid, 0}, n).mzi_count(), static_cast<std::size_t>(n * (n - 1) / 2));
}

TEST(BuildLayout, GridAlternatesEvenAndOddPairs) {
  const auto m = build_layout({LayoutKind::grid, 0}, 6);
  EXPECT_EQ(m.layers[0].mzis.front().top, 0);
  EXPECT_EQ(m.layers[1].mzis.front().top, 1);
  EXPECT_EQ(m.layers[0].mzis.size(), 3u);
  EXPECT_EQ(m.layers[1].mzis.size(), 2u);
}

TEST(BuildLayout, FftCounts) {
  const auto m = build_layout({LayoutKind::fft, 0}, 16);
  ASSERT_EQ(m.layers.size(), 4u);
  for (const auto& l : m.layers) EXPECT_EQ(l.mzis.size(), 8u);
  // Stage s pairs i with i xor 2^s.
  for (std::size_t s = 0; s < 4; ++s)
    for (const auto& z : m.layers[s].mzis) EXPECT_EQ(z.bottom, z.top ^ (1 << s));
}

TEST(BuildLayout, StackedAndTruncatedCounts) {
  EXPECT_EQ(build_layout({LayoutKind::stacked_fft, 32}, 256).layers.size(), 256u);
  EXPECT_EQ(build_layout({LayoutKind::stacked_fft, 3}, 16).mzi_count(), 3u * 8u * 4u);
  const auto t = build_layout({LayoutKind::trunc_grid, 5}, 8);
  EXPECT_EQ(t.layers.size(), 5u);
  EXPECT_EQ(t.mzi_count(), 3u * 4u + 2u * 3u);
}

TEST(BuildLayout, BlockFftStructure) {
  const auto m = build_layout({LayoutKind::block_fft, 4}, 16);
  EXPECT_EQ(m.layers.size(), 16u);
  int shuffles = 0;
  for (const auto& l : m.layers) {
    if (l.pre_permutation) ++shuffles;
    for (const auto& z : l.mzis) EXPECT_EQ(z.top / 4, z.bottom / 4) << "pairs stay inside a block";
  }
  EXPECT_EQ(shuffles, 3);
  EXPECT_NO_THROW(m.validate());
}

TEST(BuildLayout, RejectsInvalidCombinations) {
  EXPECT_THROW(build_layout({LayoutKind::fft, 0}, 12), std::invalid_argument);
  EXPECT_THROW(build_layout({LayoutKind::stacked_fft, 0}, 16), std::invalid_argument);
  EXPECT_THROW(build_layout({LayoutKind::trunc_grid, 9}, 8), std::invalid_argument);
  EXPECT_THROW(build_layout({LayoutKind::block_fft, 3}, 16), std::invalid_argument);
  EXPECT_THROW(build_layout({LayoutKind::grid, 0}, 1), std::invalid_argument);
}

TEST(BuildLayout, UniformRandomIsSeededAndWrapped) {
  const auto a = build_layout({LayoutKind::grid, 0}, 8, ParamsInit::uniform_random, 5);
  EXPECT_EQ(a, build_layout({LayoutKind::grid, 0}, 8, ParamsInit::uniform_random, 5));
  EXPECT_NE(a, build_layout({LayoutKind::grid, 0}, 8, ParamsInit::uniform_random, 6));
  for (const auto& l : a.layers)
    for (const auto& z : l.mzis) {
      EXPECT_GE(z.params.theta, 0.0);
      EXPECT_LT(z.params.theta, 2 * pi);
    }
}

TEST(MeshTransfer, TwoCrossLayersGiveMinusIdentity) {
  // Two consecutive single-MZI layers on n = 2, both in the cross state.
  const auto m = build_layout({LayoutKind::stacked_fft, 2}, 2);
  ASSERT_EQ(m.layers.size(), 2u);
  const CMatrix cross = mzi_transfer_ideal(0.0, 0.0);
  expect_matrix_near(testing::naive_product(cross, cross), -1.0 * CMatrix::identity(2), 1e-15);
  expect_matrix_near(mesh_transfer(m), -1.0 * CMatrix::identity(2), 1e-15);
}

TEST(MeshTransfer, MatchesColumnwiseApply) {
  for (auto layout : {Layout{LayoutKind::grid, 0}, Layout{LayoutKind::fft, 0}, Layout{LayoutKind::block_fft, 4}}) {
    const auto m = build_layout(layout, 16, ParamsInit::uniform_random, 21);
    const CMatrix t = mesh_transfer(m);
    for (std::size_t c = 0; c < 16; ++c) {
      CVector e(16);
      e[c] = 1.0;
      const CVector col = mzinet::apply(m, e);
      for (std::size_t r = 0; r < 16; ++r) EXPECT_LT(std::abs(col[r] - t(r, c)), 1e-12);
    }
    EXPECT_NEAR(fidelity(t, t), 1.0, 1e-12);
  }
}

TEST(MeshTransfer, UnitaryForArbitraryAndPerturbedParameters) {
  Rng rng(8);
  for (auto layout : {Layout{LayoutKind::grid, 0}, Layout{LayoutKind::stacked_fft, 2}, Layout{LayoutKind::trunc_grid, 3},
                      Layout{LayoutKind::block_fft, 2}}) {
    auto m = build_layout(layout, 8, ParamsInit::uniform_random, 9);
    for (auto& l : m.layers)
      for (auto& z : l.mzis) {
        z.params.theta += 50.0 * rng.normal();  // unwrapped phases too
        z.params.dt1 = rng.uniform(-0.5, 0.5);
        z.params.dt2 = rng.uniform(-0.5, 0.5);
      }
    EXPECT_LT(unitarity_error(mesh_transfer(m)), 1e-10) << to_string(layout);
  }
}

TEST(Apply, PhaseScreenOnlyMesh) {
  UnitaryMesh m{3, {}, {0.1, 1.2, -2.0}, {LayoutKind::custom, 0}};
  const CVector x{1.0, cdouble(0.0, 2.0), -3.0};
  const CVector y = mzinet::apply(m, x);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_LT(std::abs(y[k] - std::polar(1.0, m.output_phases[k]) * x[k]), 1e-15);
}

TEST(Apply, BarStateGridIsSignedDiagonal) {
  auto m = build_layout({LayoutKind::grid, 0}, 6);
  std::vector<int> tops(6, 0);
  for (auto& l : m.layers)
    for (auto& z : l.mzis) {
      z.params.theta = pi;
      ++tops[static_cast<std::size_t>(z.top)];
    }
  m.output_phases = {0.3, 0.0, 1.0, 2.0, -1.0, 0.5};
  const CMatrix t = mesh_transfer(m);
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t c = 0; c < 6; ++c) {
      const cdouble expected = r == c ? std::polar(tops[r] % 2 ? -1.0 : 1.0, m.output_phases[r]) : 0.0;
      EXPECT_LT(std::abs(t(r, c) - expected), 1e-14);
    }
}

TEST(Apply, RandomFftMatchesMatrixProduct) {
  const auto m = build_layout({LayoutKind::fft, 0}, 16, ParamsInit::uniform_random, 31);
  Rng rng(32);
  const CVector x = testing::random_vector(16, rng);
  const CVector y = mzinet::apply(m, x);
  const CVector z = matvec(mesh_transfer(m), x);
  for (std::size_t k = 0; k < 16; ++k) EXPECT_LT(std::abs(y[k] - z[k]), 1e-12);
  EXPECT_NEAR(norm2(y), norm2(x), 1e-12);
}

TEST(Apply, RejectsLengthMismatch) {
  const auto m = build_layout({LayoutKind::grid, 0}, 4);
  EXPECT_THROW(mzinet::apply(m, CVector(5)), DimensionError);
}

TEST(DiagonalApply, Examples) {
  DiagonalLayer full{{pi, pi, pi}, 1.0};
  const CVector x{1.0, cdouble(0, 1), 2.0};
  EXPECT_EQ(diagonal_apply(full, x), x);
  DiagonalLayer off{{0.0, 0.0, 0.0}, 1.0};
  for (cdouble z : diagonal_apply(off, x)) EXPECT_EQ(z, cdouble{});
  DiagonalLayer mixed{{pi, pi / 2}, 2.0};
  const CVector y = diagonal_apply(mixed, CVector{1.0, 1.0});
  EXPECT_NEAR(y[0].real(), 2.0, 1e-15);
  EXPECT_NEAR(y[1].real(), std::sqrt(2.0), 1e-15);
  EXPECT_THROW(diagonal_apply(mixed, x), DimensionError);
}

TEST(MultiplierTransfer, IdentityMeshesGivePhaseScreens) {
  LinearMultiplier lm;
  lm.v_dagger = UnitaryMesh{3, {}, {0.1, 0.2, 0.3}, {LayoutKind::custom, 0}};
  lm.u = UnitaryMesh{3, {}, {1.0, -0.5, 0.0}, {LayoutKind::custom, 0}};
  lm.sigma = DiagonalLayer{{pi, pi, pi}, 1.0};
  const CMatrix t = multiplier_transfer(lm);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_LT(std::abs(t(k, k) - std::polar(1.0, lm.v_dagger.output_phases[k] + lm.u.output_phases[k])), 1e-15);
}

TEST(MultiplierTransfer, LinearInBeta) {
  LinearMultiplier lm{build_layout({LayoutKind::grid, 0}, 5, ParamsInit::uniform_random, 1), DiagonalLayer{{1.0, 2.0, 3.0, 0.5, 2.5}, 1.3},
                      build_layout({LayoutKind::grid, 0}, 5, ParamsInit::uniform_random, 2)};
  const CMatrix t1 = multiplier_transfer(lm);
  lm.sigma.beta *= 2.0;
  expect_matrix_near(multiplier_transfer(lm), 2.0 * t1, 1e-13);
}

TEST(Connectivity, FftReachesAllOutputs) {
  for (int n : {8, 64}) {
    auto m = build_layout({LayoutKind::fft, 0}, n);
    for (auto& l : m.layers)
      for (auto& z : l.mzis) z.params.theta = pi / 2;
    for (int in = 0; in < n; in += 7) {
      CVector e(static_cast<std::size_t>(n));
      e[static_cast<std::size_t>(in)] = 1.0;
      for (cdouble z : mzinet::apply(m, e)) EXPECT_GT(std::abs(z), 1e-6);
    }
  }
}

TEST(Connectivity, TruncGridIsLocal) {
  const int n = 16;
  for (int p : {1, 3, 6}) {
    const CMatrix t = mesh_transfer(build_layout({LayoutKind::trunc_grid, p}, n, ParamsInit::uniform_random, 77));
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        if (std::abs(r - c) > p) EXPECT_EQ(std::abs(t(static_cast<std::size_t>(r), static_cast<std::size_t>(c))), 0.0);
  }
}

TEST(Validate, DetectsBrokenMeshes) {
  auto m = build_layout({LayoutKind::grid, 0}, 4);
  m.layers[0].mzis.push_back({1, 2, {}});
  EXPECT_THROW(m.validate(), DimensionError);
  auto p = build_layout({LayoutKind::grid, 0}, 4);
  p.layers[1].pre_permutation = std::vector<int>{0, 0, 1, 2};
  EXPECT_THROW(p.validate(), DimensionError);
  auto q = build_layout({LayoutKind::grid, 0}, 4);
  q.output_phases.pop_back();
  EXPECT_THROW(q.validate(), DimensionError);
}

TEST(WrapPhase, IntoHalfOpenInterval) {
  EXPECT_NEAR(wrap_phase(-0.5), 2 * pi - 0.5, 1e-15);
  EXPECT_EQ(wrap_phase(2 * pi), 0.0);
  EXPECT_NEAR(wrap_phase(7.0), 7.0 - 2 * pi, 1e-15);
}

}  // namespace
}  // namespace mzinet
