#include "mzinet/mesh.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mzinet {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr cdouble kI{0.0, 1.0};

void check_batch(int n, const CMatrix& x) {
  if (static_cast<int>(x.rows()) != n) {
    throw DimensionError("propagation: signal has " + std::to_string(x.rows()) + " rows, mesh has " +
                         std::to_string(n) + " waveguides");
  }
}

CMatrix column_matrix(std::span<const cdouble> x) {
  return CMatrix(x.size(), 1, std::vector<cdouble>(x.begin(), x.end()));
}

std::vector<MeshLayer> grid_layers(int n, int depth) {
  std::vector<MeshLayer> layers(static_cast<std::size_t>(depth));
  for (int l = 0; l < depth; ++l) {
    for (int m = l % 2; m + 1 < n; m += 2) layers[static_cast<std::size_t>(l)].mzis.push_back({m, m + 1, {}});
  }
  return layers;
}

std::vector<MeshLayer> fft_layers(int n) {
  const int stages = std::countr_zero(static_cast<unsigned>(n));
  std::vector<MeshLayer> layers(static_cast<std::size_t>(stages));
  for (int s = 0; s < stages; ++s) {
    const int stride = 1 << s;
    for (int i = 0; i < n; ++i) {
      if ((i & stride) == 0) layers[static_cast<std::size_t>(s)].mzis.push_back({i, i + stride, {}});
    }
  }
  return layers;
}

bool power_of_two(int n) { return n >= 1 && std::has_single_bit(static_cast<unsigned>(n)); }

}  // namespace

Mat2 beamsplitter_matrix(double dt) {
  const double transmittance = 0.5 + dt;
  if (!(transmittance >= 0.0 && transmittance <= 1.0)) {
    throw std::invalid_argument("beamsplitter transmittance " + std::to_string(transmittance) +
                                " outside [0, 1]");
  }
  const double r = std::sqrt(transmittance);
  const double t = std::sqrt(std::max(0.0, 1.0 - r * r));
  return {r, kI * t, kI * t, r};
}

Mat2 mzi_matrix_full(const MziParams& p) {
  const Mat2 bs1 = beamsplitter_matrix(p.dt1);
  const Mat2 bs2 = beamsplitter_matrix(p.dt2);
  const Mat2 ps_theta{std::polar(1.0, p.theta), 0.0, 0.0, 1.0};
  const Mat2 ps_phi{std::polar(1.0, p.phi), 0.0, 0.0, 1.0};
  return (bs1 * ps_theta) * (bs2 * ps_phi);
}

Mat2 mzi_matrix_dtheta(const MziParams& p) {
  const Mat2 d_theta{kI * std::polar(1.0, p.theta), 0.0, 0.0, 0.0};
  const Mat2 ps_phi{std::polar(1.0, p.phi), 0.0, 0.0, 1.0};
  return (beamsplitter_matrix(p.dt1) * d_theta) * (beamsplitter_matrix(p.dt2) * ps_phi);
}

Mat2 operator*(const Mat2& x, const Mat2& y) {
  return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d, x.c * y.a + x.d * y.c, x.c * y.b + x.d * y.d};
}

Mat2 mzi_matrix_ideal(double theta, double phi) {
  const cdouble pre = kI * std::polar(1.0, theta / 2.0);
  const cdouble eph = std::polar(1.0, phi);
  const double s = std::sin(theta / 2.0);
  const double c = std::cos(theta / 2.0);
  return {pre * eph * s, pre * c, pre * eph * c, -pre * s};
}

CMatrix to_cmatrix(const Mat2& m) { return CMatrix{{m.a, m.b}, {m.c, m.d}}; }

CMatrix mzi_transfer_ideal(double theta, double phi) { return to_cmatrix(mzi_matrix_ideal(theta, phi)); }

CMatrix mzi_transfer_full(const MziParams& p) { return to_cmatrix(mzi_matrix_full(p)); }

std::string to_string(LayoutKind kind) {
  switch (kind) {
    case LayoutKind::grid: return "grid";
    case LayoutKind::fft: return "fft";
    case LayoutKind::stacked_fft: return "stacked_fft";
    case LayoutKind::trunc_grid: return "trunc_grid";
    case LayoutKind::block_fft: return "block_fft";
    case LayoutKind::custom: return "custom";
  }
  return "custom";
}

LayoutKind layout_kind_from_string(const std::string& s) {
  for (auto k : {LayoutKind::grid, LayoutKind::fft, LayoutKind::stacked_fft, LayoutKind::trunc_grid,
                 LayoutKind::block_fft, LayoutKind::custom}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown layout kind '" + s + "'");
}

std::string to_string(const Layout& layout) {
  switch (layout.kind) {
    case LayoutKind::stacked_fft:
    case LayoutKind::trunc_grid:
    case LayoutKind::block_fft: return to_string(layout.kind) + "(" + std::to_string(layout.param) + ")";
    default: return to_string(layout.kind);
  }
}

std::size_t UnitaryMesh::mzi_count() const {
  std::size_t c = 0;
  for (const auto& l : layers) c += l.mzis.size();
  return c;
}

bool is_permutation(std::span<const int> perm, int n) {
  if (static_cast<int>(perm.size()) != n) return false;
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (int p : perm) {
    if (p < 0 || p >= n || seen[static_cast<std::size_t>(p)]) return false;
    seen[static_cast<std::size_t>(p)] = 1;
  }
  return true;
}

void UnitaryMesh::validate() const {
  if (n < 1) throw DimensionError("mesh: n must be positive");
  if (static_cast<int>(output_phases.size()) != n) throw DimensionError("mesh: output phase count != n");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.pre_permutation && !is_permutation(*layer.pre_permutation, n)) {
      throw DimensionError("mesh: layer " + std::to_string(l) + " pre-permutation is not a bijection");
    }
    std::vector<char> used(static_cast<std::size_t>(n), 0);
    for (const auto& mzi : layer.mzis) {
      if (mzi.top < 0 || mzi.bottom >= n || mzi.top >= mzi.bottom) {
        throw DimensionError("mesh: layer " + std::to_string(l) + " has invalid pair (" +
                             std::to_string(mzi.top) + "," + std::to_string(mzi.bottom) + ")");
      }
      for (int idx : {mzi.top, mzi.bottom}) {
        if (used[static_cast<std::size_t>(idx)]) {
          throw DimensionError("mesh: layer " + std::to_string(l) + " reuses waveguide " + std::to_string(idx));
        }
        used[static_cast<std::size_t>(idx)] = 1;
      }
    }
  }
}

std::vector<double> DiagonalLayer::amplitudes() const {
  std::vector<double> a(thetas.size());
  for (std::size_t i = 0; i < thetas.size(); ++i) a[i] = beta * std::abs(std::sin(thetas[i] / 2.0));
  return a;
}

std::vector<int> perfect_shuffle(int n, int b) {
  if (b < 1 || n % b != 0) throw std::invalid_argument("perfect_shuffle: block width must divide n");
  const int blocks = n / b;
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int blk = 0; blk < blocks; ++blk)
    for (int off = 0; off < b; ++off) perm[static_cast<std::size_t>(off * blocks + blk)] = blk * b + off;
  return perm;
}

UnitaryMesh build_layout(Layout layout, int n, ParamsInit init, std::uint64_t seed) {
  UnitaryMesh mesh;
  mesh.n = n;
  mesh.layout = layout;
  switch (layout.kind) {
    case LayoutKind::grid:
      if (n < 2) throw std::invalid_argument("grid layout needs n >= 2");
      mesh.layers = grid_layers(n, n);
      break;
    case LayoutKind::trunc_grid:
      if (n < 2) throw std::invalid_argument("trunc_grid layout needs n >= 2");
      if (layout.param < 1 || layout.param > n) throw std::invalid_argument("trunc_grid(p) needs 1 <= p <= n");
      mesh.layers = grid_layers(n, layout.param);
      break;
    case LayoutKind::fft:
      if (!power_of_two(n) || n < 2) throw std::invalid_argument("fft layout needs n = 2^p >= 2");
      mesh.layers = fft_layers(n);
      break;
    case LayoutKind::stacked_fft: {
      if (!power_of_two(n) || n < 2) throw std::invalid_argument("stacked_fft layout needs n = 2^p >= 2");
      if (layout.param < 1) throw std::invalid_argument("stacked_fft(k) needs k >= 1");
      const auto one = fft_layers(n);
      for (int k = 0; k < layout.param; ++k) mesh.layers.insert(mesh.layers.end(), one.begin(), one.end());
      break;
    }
    case LayoutKind::block_fft: {
      const int b = layout.param;
      if (n < 2 || b < 2 || b > n || n % b != 0) throw std::invalid_argument("block_fft(b) needs 2 <= b, b | n");
      const int segments = n / b;
      const auto shuffle = perfect_shuffle(n, b);
      for (int s = 0; s < segments; ++s) {
        for (int l = 0; l < b; ++l) {
          MeshLayer layer;
          if (s > 0 && l == 0) layer.pre_permutation = shuffle;
          for (int blk = 0; blk < segments; ++blk) {
            for (int off = l % 2; off + 1 < b; off += 2) layer.mzis.push_back({blk * b + off, blk * b + off + 1, {}});
          }
          mesh.layers.push_back(std::move(layer));
        }
      }
      break;
    }
    case LayoutKind::custom: throw std::invalid_argument("build_layout: custom layouts are built by hand");
  }
  mesh.output_phases.assign(static_cast<std::size_t>(n), 0.0);
  if (init == ParamsInit::uniform_random) {
    Rng rng(seed);
    for (auto& layer : mesh.layers) {
      for (auto& mzi : layer.mzis) {
        mzi.params.theta = rng.uniform(0.0, kTwoPi);
        mzi.params.phi = rng.uniform(0.0, kTwoPi);
      }
    }
    for (auto& a : mesh.output_phases) a = rng.uniform(0.0, kTwoPi);
  }
  return mesh;
}

void permute_rows(CMatrix& x, std::span<const int> perm) {
  const CMatrix src = x;
  for (std::size_t k = 0; k < perm.size(); ++k) {
    auto from = src.row(static_cast<std::size_t>(perm[k]));
    std::copy(from.begin(), from.end(), x.row(k).begin());
  }
}

void apply_inplace(const UnitaryMesh& m, CMatrix& x) {
  check_batch(m.n, x);
  const std::size_t cols = x.cols();
  for (const auto& layer : m.layers) {
    if (layer.pre_permutation) permute_rows(x, *layer.pre_permutation);
    for (const auto& mzi : layer.mzis) {
      const Mat2 t = mzi_matrix_full(mzi.params);
      cdouble* xi = x.row(static_cast<std::size_t>(mzi.top)).data();
      cdouble* xj = x.row(static_cast<std::size_t>(mzi.bottom)).data();
      for (std::size_t b = 0; b < cols; ++b) {
        const cdouble u = xi[b];
        const cdouble v = xj[b];
        xi[b] = t.a * u + t.b * v;
        xj[b] = t.c * u + t.d * v;
      }
    }
  }
  for (int k = 0; k < m.n; ++k) {
    const cdouble ph = std::polar(1.0, m.output_phases[static_cast<std::size_t>(k)]);
    for (auto& z : x.row(static_cast<std::size_t>(k))) z *= ph;
  }
}

void apply_inplace(const DiagonalLayer& d, CMatrix& x) {
  check_batch(d.n(), x);
  const auto amp = d.amplitudes();
  for (std::size_t k = 0; k < amp.size(); ++k)
    for (auto& z : x.row(k)) z *= amp[k];
}

void apply_inplace(const LinearMultiplier& lm, CMatrix& x) {
  apply_inplace(lm.v_dagger, x);
  apply_inplace(lm.sigma, x);
  apply_inplace(lm.u, x);
}

CVector apply(const UnitaryMesh& m, std::span<const cdouble> x) {
  CMatrix col = column_matrix(x);
  apply_inplace(m, col);
  return col.column(0);
}

CVector diagonal_apply(const DiagonalLayer& d, std::span<const cdouble> x) {
  CMatrix col = column_matrix(x);
  apply_inplace(d, col);
  return col.column(0);
}

CVector apply(const LinearMultiplier& lm, std::span<const cdouble> x) {
  CMatrix col = column_matrix(x);
  apply_inplace(lm, col);
  return col.column(0);
}

CMatrix mesh_transfer(const UnitaryMesh& m) {
  CMatrix t = CMatrix::identity(static_cast<std::size_t>(m.n));
  apply_inplace(m, t);
  return t;
}

CMatrix diagonal_transfer(const DiagonalLayer& d) {
  CMatrix t = CMatrix::identity(d.thetas.size());
  apply_inplace(d, t);
  return t;
}

CMatrix multiplier_transfer(const LinearMultiplier& lm) {
  if (lm.v_dagger.n != lm.u.n || lm.sigma.n() != lm.u.n) throw DimensionError("multiplier: dimensions disagree");
  CMatrix t = CMatrix::identity(static_cast<std::size_t>(lm.n()));
  apply_inplace(lm, t);
  return t;
}

double wrap_phase(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;
  return w;
}

}  // namespace mzinet
