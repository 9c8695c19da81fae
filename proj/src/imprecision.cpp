#include "mzinet/imprecision.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace mzinet {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Adds sigma * z to dt and clamps the resulting transmittance into [0, 1].
void jitter_splitter(double& dt, double sigma, double z, std::size_t& clamps) {
  dt += sigma * z;
  if (dt > 0.5) {
    dt = 0.5;
    ++clamps;
  } else if (dt < -0.5) {
    dt = -0.5;
    ++clamps;
  }
}

bool in_window(const BlockSpec& b, int layer, int wg) {
  return layer >= b.layer_begin && layer < b.layer_end && wg >= b.wg_begin && wg < b.wg_end;
}

}  // namespace

void NoiseSpec::validate() const {
  if (!std::isfinite(sigma_ps) || sigma_ps < 0.0) throw std::invalid_argument("NoiseSpec: sigma_ps must be finite and >= 0");
  if (!std::isfinite(sigma_bs) || sigma_bs < 0.0) throw std::invalid_argument("NoiseSpec: sigma_bs must be finite and >= 0");
  if (quant_bits && (*quant_bits < 1 || *quant_bits > 30)) throw std::invalid_argument("NoiseSpec: quant_bits must be in [1, 30]");
  if (block && (!std::isfinite(block->sigma_ps) || block->sigma_ps < 0.0))
    throw std::invalid_argument("NoiseSpec: block sigma_ps must be finite and >= 0");
}

UnitaryMesh perturb_phases(const UnitaryMesh& m, double sigma_ps, Rng& rng) {
  UnitaryMesh out = m;
  for (auto& layer : out.layers)
    for (auto& z : layer.mzis) {
      z.params.theta += sigma_ps * rng.normal();
      z.params.phi += sigma_ps * rng.normal();
    }
  for (double& p : out.output_phases) p += sigma_ps * rng.normal();
  return out;
}

DiagonalLayer perturb_phases(const DiagonalLayer& d, double sigma_ps, Rng& rng) {
  DiagonalLayer out = d;
  for (double& t : out.thetas) t += sigma_ps * rng.normal();
  return out;
}

UnitaryMesh perturb_splitters(const UnitaryMesh& m, double sigma_bs, Rng& rng, std::size_t* clamps) {
  UnitaryMesh out = m;
  std::size_t count = 0;
  for (auto& layer : out.layers)
    for (auto& z : layer.mzis) {
      jitter_splitter(z.params.dt1, sigma_bs, rng.normal(), count);
      jitter_splitter(z.params.dt2, sigma_bs, rng.normal(), count);
    }
  if (clamps) *clamps += count;
  return out;
}

UnitaryMesh perturb_mesh(const UnitaryMesh& m, double sigma_ps, double sigma_bs, Rng& rng, std::size_t* clamps) {
  UnitaryMesh out = m;
  std::size_t count = 0;
  for (auto& layer : out.layers)
    for (auto& z : layer.mzis) {
      z.params.theta += sigma_ps * rng.normal();
      z.params.phi += sigma_ps * rng.normal();
      jitter_splitter(z.params.dt1, sigma_bs, rng.normal(), count);
      jitter_splitter(z.params.dt2, sigma_bs, rng.normal(), count);
    }
  for (double& p : out.output_phases) p += sigma_ps * rng.normal();
  if (clamps) *clamps += count;
  return out;
}

UnitaryMesh perturb_block(const UnitaryMesh& m, const BlockSpec& block, Rng& rng) {
  const int virtual_layer = static_cast<int>(m.layers.size());
  if (!block.empty() && (block.layer_begin < 0 || block.layer_end > virtual_layer + 1 || block.wg_begin < 0 || block.wg_end > m.n))
    throw std::out_of_range("perturb_block: window [" + std::to_string(block.layer_begin) + ", " + std::to_string(block.layer_end) + ") x [" +
                            std::to_string(block.wg_begin) + ", " + std::to_string(block.wg_end) + ") exceeds mesh");
  UnitaryMesh out = m;
  const double s = block.sigma_ps;
  for (int l = 0; l < virtual_layer; ++l)
    for (auto& z : out.layers[static_cast<std::size_t>(l)].mzis) {
      const double a = rng.normal();
      const double b = rng.normal();
      if (in_window(block, l, z.top)) {
        z.params.theta += s * a;
        z.params.phi += s * b;
      }
    }
  for (int k = 0; k < m.n; ++k) {
    const double a = rng.normal();
    if (in_window(block, virtual_layer, k)) out.output_phases[static_cast<std::size_t>(k)] += s * a;
  }
  return out;
}

double quantization_level(int i, int bits) {
  const double u = static_cast<double>(i) / std::ldexp(1.0, bits);
  return kTwoPi * u * u;
}

double quantize_phase(double phase, int bits) {
  if (bits < 1 || bits > 30) throw std::invalid_argument("quantize_phase: bits must be in [1, 30]");
  const double w = wrap_phase(phase);
  const int levels = 1 << bits;
  // Invert the quadratic map, then compare the two neighbouring levels.
  const int guess = std::clamp(static_cast<int>(std::floor(std::sqrt(w / kTwoPi) * levels)), 0, levels - 1);
  int best = guess;
  double best_err = std::abs(w - quantization_level(guess, bits));
  for (int i : {guess - 1, guess + 1}) {
    if (i < 0 || i >= levels) continue;
    const double err = std::abs(w - quantization_level(i, bits));
    if (err < best_err) {
      best = i;
      best_err = err;
    }
  }
  return quantization_level(best, bits);
}

UnitaryMesh quantize_phases(const UnitaryMesh& m, int bits) {
  UnitaryMesh out = m;
  for (auto& layer : out.layers)
    for (auto& z : layer.mzis) {
      z.params.theta = quantize_phase(z.params.theta, bits);
      z.params.phi = quantize_phase(z.params.phi, bits);
    }
  for (double& p : out.output_phases) p = quantize_phase(p, bits);
  return out;
}

DiagonalLayer quantize_phases(const DiagonalLayer& d, int bits) {
  DiagonalLayer out = d;
  for (double& t : out.thetas) t = quantize_phase(t, bits);
  return out;
}

double laser_phase_sigma(double linewidth_hz, double path_length_m) {
  if (linewidth_hz < 0.0 || path_length_m < 0.0) throw std::invalid_argument("laser_phase_sigma: inputs must be >= 0");
  return std::sqrt(kTwoPi * linewidth_hz * path_length_m / kSpeedOfLight);
}

}  // namespace mzinet
