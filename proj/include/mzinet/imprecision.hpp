#pragma once

// Error models: Gaussian phase and beamsplitter noise, localized block faults,
// phase quantization and the laser phase-noise magnitude.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>

#include "mzinet/mesh.hpp"
#include "mzinet/rng.hpp"

namespace mzinet {

/// A rectangular window of MZIs in (layer, waveguide) coordinates that gets
/// its own phase noise. Layers [layer_begin, layer_end), MZIs whose top
/// waveguide lies in [wg_begin, wg_end). The output phase screen counts as the
/// virtual layer index mesh.layers.size(), with waveguide k for phase k.
/// mesh_id selects a mesh inside a model: 2 * layer + 0 for V^dagger, + 1 for U.
struct BlockSpec {
  int mesh_id = 0;
  int layer_begin = 0;
  int layer_end = 0;
  int wg_begin = 0;
  int wg_end = 0;
  double sigma_ps = 0.0;

  bool empty() const { return layer_begin >= layer_end || wg_begin >= wg_end; }
  friend bool operator==(const BlockSpec&, const BlockSpec&) = default;
};

struct NoiseSpec {
  double sigma_ps = 0.0;  // radians
  double sigma_bs = 0.0;  // absolute transmittance deviation, 0.01 = 1%
  std::optional<int> quant_bits;
  std::optional<BlockSpec> block;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument for negative or non-finite sigmas and
  /// non-positive bit counts.
  void validate() const;
  friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

// Every perturbation returns a fresh copy. Draws are taken in the fixed order
// (layer, MZI within layer, slot) followed by the output phase screen, and
// always consumed regardless of sigma, so a given stream lines up across sigmas.

/// Adds N(0, sigma^2) to every theta, phi and output phase.
UnitaryMesh perturb_phases(const UnitaryMesh& m, double sigma_ps, Rng& rng);
/// Adds N(0, sigma^2) to every attenuator theta.
DiagonalLayer perturb_phases(const DiagonalLayer& d, double sigma_ps, Rng& rng);

/// Adds N(0, sigma^2) to dt1 and dt2 of every MZI, clamping 1/2 + dt to [0, 1].
/// The number of clamped splitters is added to *clamps when given.
UnitaryMesh perturb_splitters(const UnitaryMesh& m, double sigma_bs, Rng& rng, std::size_t* clamps = nullptr);

/// Phase and splitter noise in one pass: per MZI the slots are theta, phi,
/// dt1, dt2, then one draw per output phase.
UnitaryMesh perturb_mesh(const UnitaryMesh& m, double sigma_ps, double sigma_bs, Rng& rng,
                         std::size_t* clamps = nullptr);

/// Phase noise restricted to the block window. Draws the same stream as
/// perturb_phases, so a block covering the whole mesh reproduces it exactly.
/// Throws std::out_of_range when the window exceeds the mesh.
UnitaryMesh perturb_block(const UnitaryMesh& m, const BlockSpec& block, Rng& rng);

/// Representable phases with B control bits: 2 pi (i / 2^B)^2, i in [0, 2^B).
double quantization_level(int i, int bits);
/// Nearest representable phase (in theta) to `phase` wrapped into [0, 2 pi).
double quantize_phase(double phase, int bits);
/// Quantizes every theta, phi and output phase.
UnitaryMesh quantize_phases(const UnitaryMesh& m, int bits);
DiagonalLayer quantize_phases(const DiagonalLayer& d, int bits);

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

/// sqrt(2 pi df L / c): phase spread accumulated over a path of length L for a
/// laser of linewidth df.
double laser_phase_sigma(double linewidth_hz, double path_length_m);

}  // namespace mzinet
