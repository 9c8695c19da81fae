#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mzinet/decompose.hpp"
#include "mzinet/svd.hpp"
#include "test_support.hpp"

namespace mzinet {
namespace {

using std::numbers::pi;
using testing::expect_matrix_near;

TEST(Clements, RoundTripHaar) {
  for (int n : {2, 3, 4, 7, 8, 16, 32}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const CMatrix u = haar_random_unitary(static_cast<std::size_t>(n), seed * 100 + static_cast<std::uint64_t>(n));
      const UnitaryMesh m = clements_decompose(u);
      EXPECT_EQ(m.layout.kind, LayoutKind::grid);
      EXPECT_EQ(m.mzi_count(), static_cast<std::size_t>(n * (n - 1) / 2));
      EXPECT_NO_THROW(m.validate());
      EXPECT_LT(max_abs_diff(mesh_transfer(m), u), 1e-10) << "n=" << n;
      EXPECT_NEAR(fidelity(u, mesh_transfer(m)), 1.0, 1e-12);
    }
  }
}

TEST(Clements, SizeOneIsPhaseOnly) {
  const CMatrix u{{std::polar(1.0, 0.4)}};
  const UnitaryMesh m = clements_decompose(u);
  EXPECT_EQ(m.mzi_count(), 0u);
  ASSERT_EQ(m.output_phases.size(), 1u);
  EXPECT_NEAR(m.output_phases[0], 0.4, 1e-15);
}

TEST(Clements, IdentityAndPermutation) {
  expect_matrix_near(mesh_transfer(clements_decompose(CMatrix::identity(6))), CMatrix::identity(6), 1e-12);
  CMatrix p(5, 5);
  for (std::size_t k = 0; k < 5; ++k) p((k + 2) % 5, k) = 1.0;
  expect_matrix_near(mesh_transfer(clements_decompose(p)), p, 1e-12);
}

TEST(Clements, RejectsNonUnitary) {
  EXPECT_THROW(clements_decompose(CMatrix{{1.0, 0.1}, {0.0, 1.0}}), NotUnitaryError);
  EXPECT_THROW(clements_decompose(CMatrix(2, 3)), DimensionError);
}

TEST(Clements, SixtyFourHaar) {
  const CMatrix u = haar_random_unitary(64, 2024);
  EXPECT_LT(max_abs_diff(mesh_transfer(clements_decompose(u)), u), 1e-9);
}

TEST(PhaseCommute, IdentityHolds) {
  Rng rng(12);
  for (int k = 0; k < 50; ++k) {
    const double theta = rng.uniform(0, 2 * pi);
    const double phi = rng.uniform(0, 2 * pi);
    const cdouble a = std::polar(1.0, rng.uniform(0, 2 * pi));
    const cdouble b = std::polar(1.0, rng.uniform(0, 2 * pi));
    const PhaseCommute pc = commute_dagger_through_phases(theta, phi, a, b);
    const CMatrix lhs = testing::naive_product(dagger(mzi_transfer_ideal(theta, phi)), CMatrix::diagonal(CVector{a, b}));
    const CMatrix rhs = testing::naive_product(CMatrix::diagonal(CVector{pc.a_prime, pc.b_prime}), mzi_transfer_ideal(theta, pc.phi_prime));
    expect_matrix_near(lhs, rhs, 1e-14);
    EXPECT_NEAR(std::abs(pc.a_prime), 1.0, 1e-14);
  }
}

TEST(Svd, ReconstructsRandomMatrices) {
  for (std::size_t n : {1u, 2u, 5u, 16u, 40u}) {
    Rng gen(7 + n);
    const CMatrix a = random_complex_matrix(n, n, gen);
    const SvdResult r = jacobi_svd(a);
    EXPECT_LT(unitarity_error(r.u), 1e-12);
    EXPECT_LT(unitarity_error(r.v_dagger), 1e-12);
    EXPECT_TRUE(std::is_sorted(r.s.rbegin(), r.s.rend()));
    CMatrix us = r.u;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) us(i, j) *= r.s[j];
    EXPECT_LT(max_abs_diff(testing::naive_product(us, r.v_dagger), a), 1e-11 * (1.0 + frobenius_norm(a)));
  }
}

TEST(Svd, SingularValuesMatchEigenvaluesOfGram) {
  // For a 2x2 matrix the singular values follow in closed form from the
  // trace and determinant of A^H A.
  const CMatrix a{{cdouble(1, 2), cdouble(-0.5, 0.3)}, {cdouble(0.7, 0), cdouble(2, -1)}};
  const CMatrix g = testing::naive_product(dagger(a), a);
  const double tr = trace(g).real();
  const double det = std::abs(g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0));
  const double disc = std::sqrt(tr * tr / 4 - det);
  const SvdResult r = jacobi_svd(a);
  EXPECT_NEAR(r.s[0], std::sqrt(tr / 2 + disc), 1e-12);
  EXPECT_NEAR(r.s[1], std::sqrt(tr / 2 - disc), 1e-12);
}

TEST(Svd, RankDeficientStillUnitary) {
  CMatrix a(4, 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) a(i, j) = cdouble(static_cast<double>(i + 1), 0.0) * cdouble(1.0, static_cast<double>(j));
  const SvdResult r = jacobi_svd(a);
  EXPECT_LT(unitarity_error(r.u), 1e-10);
  EXPECT_LT(r.s[1], 1e-10);
}

TEST(SvdTriple, SigmaInUnitIntervalAndReconstructs) {
  Rng gen(41);
    const CMatrix m = random_complex_matrix(12, 12, gen);
  const SvdTriple t = svd_triple(m);
  EXPECT_NEAR(t.sigma.front(), 1.0, 1e-15);
  for (double s : t.sigma) {
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
  expect_matrix_near(reconstruct(t), m, 1e-11);
  EXPECT_THROW(svd_triple(CMatrix(3, 3)), std::invalid_argument);
}

TEST(SvdTriple, MultiplierRealizesMatrix) {
  Rng gen(5);
    const CMatrix m = random_complex_matrix(16, 16, gen);
  const LinearMultiplier lm = svd_to_multiplier(m);
  EXPECT_LT(max_abs_diff(multiplier_transfer(lm), m), 1e-10 * frobenius_norm(m));
  for (double th : lm.sigma.thetas) {
    EXPECT_GE(th, 0.0);
    EXPECT_LE(th, pi + 1e-15);
  }
}

TEST(SvdTriple, PermutationLeavesProductInvariant) {
  Rng gen(6);
    const CMatrix m = random_complex_matrix(10, 10, gen);
  const SvdTriple t = svd_triple(m);
  Rng rng(99);
  for (int k = 0; k < 5; ++k) {
    const auto perm = rng.permutation(10);
    const SvdTriple p = permute_singular(t, perm);
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(p.sigma[i], t.sigma[static_cast<std::size_t>(perm[i])]);
    expect_matrix_near(reconstruct(p), m, 1e-11);
  }
  EXPECT_THROW(permute_singular(t, std::vector<int>{0, 1}), std::invalid_argument);
}

TEST(SvdTriple, SortOrders) {
  Rng gen(2);
  const SvdTriple t = svd_triple(random_complex_matrix(8, 8, gen));
  const SvdTriple d = sort_singular(t, SingularOrder::descending);
  EXPECT_TRUE(std::is_sorted(d.sigma.rbegin(), d.sigma.rend()));
  const SvdTriple r = sort_singular(t, SingularOrder::random, 3);
  EXPECT_FALSE(std::is_sorted(r.sigma.rbegin(), r.sigma.rend()));
  EXPECT_EQ(r.sigma, sort_singular(t, SingularOrder::random, 3).sigma);
  auto a = r.sigma, b = d.sigma;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
  EXPECT_EQ(singular_order_from_string(to_string(SingularOrder::random)), SingularOrder::random);
}

TEST(BitReversal, KnownPermutations) {
  EXPECT_EQ(bit_reversal_permutation(8), (std::vector<int>{0, 4, 2, 6, 1, 5, 3, 7}));
  EXPECT_EQ(bit_reversal_permutation(1), std::vector<int>{0});
  EXPECT_THROW(bit_reversal_permutation(6), std::invalid_argument);
  const auto p = bit_reversal_permutation(256);
  for (int k = 0; k < 256; ++k) EXPECT_EQ(p[static_cast<std::size_t>(p[static_cast<std::size_t>(k)])], k);
}

TEST(Fft, DftOracleEntries) {
  const CMatrix f = dft_matrix(4);
  EXPECT_NEAR(std::abs(f(1, 1) - cdouble(0.0, -0.5)), 0.0, 1e-15);
  EXPECT_LT(unitarity_error(dft_matrix(64)), 1e-12);
}

TEST(Fft, MeshRealizesDft) {
  for (int n : {2, 4, 8, 16, 64, 256}) {
    const FftConfig cfg = fft_configure(n);
    EXPECT_EQ(cfg.mesh.layers.size(), static_cast<std::size_t>(std::log2(n)));
    for (const auto& l : cfg.mesh.layers)
      for (const auto& z : l.mzis) EXPECT_NEAR(z.params.theta, pi / 2, 1e-15);
    EXPECT_LT(max_abs_diff(fft_transfer(cfg), dft_matrix(n)), 1e-10) << "n=" << n;
  }
}

TEST(Fft, ApplyAndInverse) {
  const FftConfig cfg = fft_configure(32);
  Rng rng(17);
  const CVector x = testing::random_vector(32, rng);
  const CVector y = fft_apply(cfg, x);
  const CVector ref = matvec(dft_matrix(32), x);
  for (std::size_t k = 0; k < 32; ++k) EXPECT_LT(std::abs(y[k] - ref[k]), 1e-12);
  const CVector back = fft_apply_inverse(cfg, y);
  for (std::size_t k = 0; k < 32; ++k) EXPECT_LT(std::abs(back[k] - x[k]), 1e-12);
}

TEST(Fft, CircularConvolutionMatchesDirectSum) {
  for (int n : {4, 16, 64}) {
    const FftConfig cfg = fft_configure(n);
    Rng rng(static_cast<std::uint64_t>(n));
    const CVector x = testing::random_vector(static_cast<std::size_t>(n), rng);
    const CVector h = testing::random_vector(static_cast<std::size_t>(n), rng);
    const CVector y = circular_convolve(cfg, h, x);
    for (int k = 0; k < n; ++k) {
      cdouble s{};
      for (int m = 0; m < n; ++m) s += h[static_cast<std::size_t>(m)] * x[static_cast<std::size_t>(((k - m) % n + n) % n)];
      EXPECT_LT(std::abs(y[static_cast<std::size_t>(k)] - s), 1e-10);
    }
  }
}

TEST(SvdTriple, IdentityAndScaledIdentity) {
  for (double scale : {1.0, 2.0}) {
    const CMatrix m = scale * CMatrix::identity(6);
    const SvdTriple t = svd_triple(m);
    EXPECT_NEAR(t.beta, scale, 1e-14);
    for (double s : t.sigma) EXPECT_NEAR(s, 1.0, 1e-14);
    const LinearMultiplier lm = svd_to_multiplier(m);
    expect_matrix_near(multiplier_transfer(lm), m, 1e-10);
  }
}

TEST(SvdTriple, IdentityPermutationAndSwap) {
  Rng gen(8);
  const SvdTriple t = svd_triple(random_complex_matrix(2, 2, gen));
  const SvdTriple same = permute_singular(t, std::vector<int>{0, 1});
  EXPECT_EQ(same.sigma, t.sigma);
  EXPECT_EQ(same.u, t.u);
  const SvdTriple sw = permute_singular(t, std::vector<int>{1, 0});
  expect_matrix_near(reconstruct(sw), reconstruct(t), 1e-12);
  const SvdTriple d = sort_singular(t, SingularOrder::descending);
  EXPECT_EQ(d.sigma, t.sigma);
}

TEST(Fft, SmallCasesAndFlatness) {
  EXPECT_EQ(bit_reversal_permutation(2), (std::vector<int>{0, 1}));
  const double h = 1.0 / std::sqrt(2.0);
  expect_matrix_near(fft_transfer(fft_configure(2)), CMatrix{{h, h}, {h, -h}}, 1e-12);
  EXPECT_GE(fidelity(fft_transfer(fft_configure(4)), dft_matrix(4)), 1.0 - 1e-10);
  const CMatrix f = fft_transfer(fft_configure(64));
  for (cdouble z : f.entries()) EXPECT_NEAR(std::abs(z), 1.0 / 8.0, 1e-10);
}

TEST(Fft, DeltaKernels) {
  const FftConfig cfg = fft_configure(8);
  Rng rng(4);
  const CVector x = testing::random_vector(8, rng);
  CVector d0(8), d1(8);
  d0[0] = 1.0;
  d1[1] = 1.0;
  const CVector y0 = circular_convolve(cfg, d0, x);
  const CVector y1 = circular_convolve(cfg, d1, x);
  for (std::size_t k = 0; k < 8; ++k) {
    EXPECT_LT(std::abs(y0[k] - x[k]), 1e-12);
    EXPECT_LT(std::abs(y1[k] - x[(k + 7) % 8]), 1e-12);
  }
  EXPECT_THROW(circular_convolve(cfg, CVector(4), x), DimensionError);
}

TEST(Fft, RejectsNonPowerOfTwo) { EXPECT_THROW(fft_configure(24), std::invalid_argument); }

}  // namespace
}  // namespace mzinet
