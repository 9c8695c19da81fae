#pragma once

// Mapping linear operators onto meshes: rectangular (Clements) decomposition,
// SVD assembly of linear multipliers, singular-value permutations and the
// exact FFT phase configuration.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mzinet/complex_core.hpp"
#include "mzinet/mesh.hpp"

namespace mzinet {

/// Raised when a nulling step leaves a residual above tolerance. Indicates a
/// bug rather than bad input.
class DecompositionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Grid mesh (n layers + output phase screen) whose transfer matrix equals `u`.
UnitaryMesh clements_decompose(const CMatrix& u, double tol = 1e-8);

/// Identity used when moving the residual diagonal through the output-side
/// interferometers: T(theta, phi)^dagger diag(a, b) = diag(a', b') T(theta, phi').
struct PhaseCommute {
  double phi_prime;
  cdouble a_prime;
  cdouble b_prime;
};
PhaseCommute commute_dagger_through_phases(double theta, double phi, cdouble a, cdouble b);

/// M = beta * U diag(sigma) V^dagger with sigma in [0, 1] and beta = max
/// singular value.
struct SvdTriple {
  CMatrix u;
  std::vector<double> sigma;
  CMatrix v_dagger;
  double beta = 1.0;
};

SvdTriple svd_triple(const CMatrix& m);
CMatrix reconstruct(const SvdTriple& t);

/// Builds the multiplier from a triple: both unitaries via clements_decompose,
/// attenuator phases theta_i = 2 asin(sigma_i).
LinearMultiplier multiplier_from_triple(const SvdTriple& t);
LinearMultiplier svd_to_multiplier(const CMatrix& m);

/// (U Pi^-1)(Pi Sigma Pi^-1)(Pi V^dagger): new sigma[k] = sigma[perm[k]].
SvdTriple permute_singular(const SvdTriple& t, std::span<const int> perm);

enum class SingularOrder { descending, random };
std::string to_string(SingularOrder order);
SingularOrder singular_order_from_string(const std::string& s);

SvdTriple sort_singular(const SvdTriple& t, SingularOrder order, std::uint64_t seed = 0);

/// Index i -> i with its log2(n) bits reversed. Throws for non powers of two.
std::vector<int> bit_reversal_permutation(int n);

/// Mesh in fft layout plus the input permutation that together realize the
/// unitary DFT X_k = n^{-1/2} sum_m x_m e^{-2 pi i m k / n}.
struct FftConfig {
  UnitaryMesh mesh;
  std::vector<int> input_permutation;
};

FftConfig fft_configure(int n);
CVector fft_apply(const FftConfig& cfg, std::span<const cdouble> x);
CVector fft_apply_inverse(const FftConfig& cfg, std::span<const cdouble> x);
CMatrix fft_transfer(const FftConfig& cfg);

/// Directly constructed unitary DFT matrix (oracle).
CMatrix dft_matrix(int n);

/// Circular convolution through the mesh: forward transform, pointwise product
/// with sqrt(n) * DFT(kernel), inverse transform via conjugation.
CVector circular_convolve(const FftConfig& cfg, std::span<const cdouble> kernel, std::span<const cdouble> x);

}  // namespace mzinet
