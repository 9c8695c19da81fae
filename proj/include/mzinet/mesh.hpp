#pragma once

// MZI meshes: single-interferometer transfer matrices, the mesh layouts
// (grid, fft, stacked fft, truncated grid, block fft), the diagonal attenuator
// layer and the SVD-style linear multiplier built from them.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mzinet/complex_core.hpp"

namespace mzinet {

/// Phases of one interferometer plus the deviations of its two beamsplitters
/// from 50:50 (power transmittance of splitter k is 1/2 + dt_k).
/// dt1 belongs to the output-side splitter U_BS(r), dt2 to the internal U_BS(r').
struct MziParams {
  double theta = 0.0;
  double phi = 0.0;
  double dt1 = 0.0;
  double dt2 = 0.0;

  friend bool operator==(const MziParams&, const MziParams&) = default;
};

/// 2x2 complex matrix [[a, b], [c, d]].
struct Mat2 {
  cdouble a, b, c, d;
};

Mat2 mzi_matrix_ideal(double theta, double phi);
Mat2 mzi_matrix_full(const MziParams& p);
Mat2 beamsplitter_matrix(double dt);
/// Derivative of mzi_matrix_full with respect to theta.
Mat2 mzi_matrix_dtheta(const MziParams& p);
Mat2 operator*(const Mat2& x, const Mat2& y);
CMatrix to_cmatrix(const Mat2& m);

/// i e^{i theta/2} [[e^{i phi} sin(theta/2), cos(theta/2)],
///                                [e^{i phi} cos(theta/2), -sin(theta/2)]].
CMatrix mzi_transfer_ideal(double theta, double phi);
/// U_BS(r) U_PS(theta) U_BS(r') U_PS(phi) with r = sqrt(1/2 + dt1).
CMatrix mzi_transfer_full(const MziParams& p);

/// One interferometer placed on waveguides `top` < `bottom`.
struct Mzi {
  int top = 0;
  int bottom = 1;
  MziParams params;

  friend bool operator==(const Mzi&, const Mzi&) = default;
};

/// One column of interferometers. The optional pre-permutation is applied to
/// the waveguides before the column: out[k] = in[perm[k]].
struct MeshLayer {
  std::vector<Mzi> mzis;
  std::optional<std::vector<int>> pre_permutation;

  friend bool operator==(const MeshLayer&, const MeshLayer&) = default;
};

enum class LayoutKind { grid, fft, stacked_fft, trunc_grid, block_fft, custom };

/// Layout family plus its parameter (k for stacked_fft, p for trunc_grid,
/// block width b for block_fft; unused otherwise).
struct Layout {
  LayoutKind kind = LayoutKind::grid;
  int param = 0;

  friend bool operator==(const Layout&, const Layout&) = default;
};

std::string to_string(LayoutKind kind);
LayoutKind layout_kind_from_string(const std::string& s);
std::string to_string(const Layout& layout);

struct UnitaryMesh {
  int n = 0;
  std::vector<MeshLayer> layers;
  std::vector<double> output_phases;
  Layout layout;

  std::size_t mzi_count() const;
  /// Throws DimensionError when an index is out of range, repeated within a
  /// layer, or a permutation is not a bijection.
  void validate() const;

  friend bool operator==(const UnitaryMesh&, const UnitaryMesh&) = default;
};

/// Per-channel attenuators: amplitude transmission beta * |sin(theta_i / 2)|.
struct DiagonalLayer {
  std::vector<double> thetas;
  double beta = 1.0;

  int n() const { return static_cast<int>(thetas.size()); }
  std::vector<double> amplitudes() const;

  friend bool operator==(const DiagonalLayer&, const DiagonalLayer&) = default;
};

/// M = beta * U * Sigma * V^dagger realized as mesh, attenuators, mesh.
struct LinearMultiplier {
  UnitaryMesh v_dagger;
  DiagonalLayer sigma;
  UnitaryMesh u;

  int n() const { return v_dagger.n; }

  friend bool operator==(const LinearMultiplier&, const LinearMultiplier&) = default;
};

enum class ParamsInit { zeros, uniform_random };

/// Builds an empty (all-zero or uniformly random phased) mesh of the requested
/// layout. Throws std::invalid_argument for invalid n / layout combinations.
UnitaryMesh build_layout(Layout layout, int n, ParamsInit init = ParamsInit::zeros,
                         std::uint64_t seed = 0);

/// The perfect shuffle used between block_fft segments:
/// out[off * (n / b) + blk] = in[blk * b + off].
std::vector<int> perfect_shuffle(int n, int b);

// Propagation. Batches are n x B matrices whose columns are signals.

/// Applies the mesh to every column of `x` in place.
void apply_inplace(const UnitaryMesh& m, CMatrix& x);
void apply_inplace(const DiagonalLayer& d, CMatrix& x);
void apply_inplace(const LinearMultiplier& lm, CMatrix& x);

// Call as mzinet::apply: with a std::vector argument ADL also finds std::apply.
CVector apply(const UnitaryMesh& m, std::span<const cdouble> x);
CVector diagonal_apply(const DiagonalLayer& d, std::span<const cdouble> x);
CVector apply(const LinearMultiplier& lm, std::span<const cdouble> x);

CMatrix mesh_transfer(const UnitaryMesh& m);
CMatrix diagonal_transfer(const DiagonalLayer& d);
CMatrix multiplier_transfer(const LinearMultiplier& lm);

/// Applies a permutation out[k] = in[perm[k]] to the rows of x.
void permute_rows(CMatrix& x, std::span<const int> perm);
bool is_permutation(std::span<const int> perm, int n);

/// Wraps an angle into [0, 2 pi).
double wrap_phase(double a);

}  // namespace mzinet
