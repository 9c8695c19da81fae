#include "mzinet/decompose.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>

#include "mzinet/svd.hpp"

namespace mzinet {

namespace {

constexpr double kPi = std::numbers::pi;

struct PlacedMzi {
  int layer;
  int mode;
  double theta;
  double phi;
};

double arg_or_zero(cdouble z) { return z == cdouble{} ? 0.0 : std::arg(z); }

}  // namespace

PhaseCommute commute_dagger_through_phases(double theta, double phi, cdouble a, cdouble b) {
  PhaseCommute out;
  out.phi_prime = wrap_phase(arg_or_zero(a) - arg_or_zero(b));
  out.a_prime = -std::polar(1.0, -(theta + phi)) * b;
  out.b_prime = -std::polar(1.0, -theta) * b;
  return out;
}

UnitaryMesh clements_decompose(const CMatrix& u, double tol) {
  if (!u.square() || u.rows() == 0) throw DimensionError("clements_decompose: square non-empty matrix required");
  if (unitarity_error(u) > tol) throw NotUnitaryError("clements_decompose: input is not unitary within tolerance");
  const int n = static_cast<int>(u.rows());
  CMatrix w = u;
  std::vector<PlacedMzi> right_ops;
  std::vector<PlacedMzi> left_ops;  // in nulling order

  for (int i = 0; i + 1 < n; ++i) {
    if (i % 2 == 0) {
      for (int j = 0; j <= i; ++j) {
        const int m = i - j;
        const int r = n - 1 - j;
        const cdouble x = w(r, m);
        const cdouble y = w(r, m + 1);
        const double theta = 2.0 * std::atan2(std::abs(y), std::abs(x));
        const double phi = wrap_phase(arg_or_zero(x) - arg_or_zero(y) + kPi);
        // w <- w T^dagger on columns (m, m+1)
        const Mat2 t = mzi_matrix_ideal(theta, phi);
        for (int row = 0; row < n; ++row) {
          const cdouble p = w(row, m);
          const cdouble q = w(row, m + 1);
          w(row, m) = p * std::conj(t.a) + q * std::conj(t.b);
          w(row, m + 1) = p * std::conj(t.c) + q * std::conj(t.d);
        }
        right_ops.push_back({j, m, theta, phi});
      }
    } else {
      for (int j = 0; j <= i; ++j) {
        const int m = n - 2 - i + j;
        const cdouble x = w(m, j);
        const cdouble y = w(m + 1, j);
        const double theta = 2.0 * std::atan2(std::abs(x), std::abs(y));
        const double phi = wrap_phase(arg_or_zero(y) - arg_or_zero(x));
        // w <- T w on rows (m, m+1)
        const Mat2 t = mzi_matrix_ideal(theta, phi);
        for (int col = 0; col < n; ++col) {
          const cdouble p = w(m, col);
          const cdouble q = w(m + 1, col);
          w(m, col) = t.a * p + t.b * q;
          w(m + 1, col) = t.c * p + t.d * q;
        }
        left_ops.push_back({n - 1 - j, m, theta, phi});
      }
    }
  }

  double residual = 0.0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      if (r != c) residual = std::max(residual, std::abs(w(r, c)));
  if (residual > tol) {
    throw DecompositionError("clements_decompose: nulling residual " + std::to_string(residual) +
                             " exceeds tolerance");
  }

  std::vector<cdouble> diag(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) diag[static_cast<std::size_t>(k)] = w(k, k);

  // Push the diagonal leftwards through the inverse output-side MZIs, last
  // nulled first.
  for (auto it = left_ops.rbegin(); it != left_ops.rend(); ++it) {
    const auto pc = commute_dagger_through_phases(it->theta, it->phi, diag[static_cast<std::size_t>(it->mode)],
                                                  diag[static_cast<std::size_t>(it->mode + 1)]);
    it->phi = pc.phi_prime;
    diag[static_cast<std::size_t>(it->mode)] = pc.a_prime;
    diag[static_cast<std::size_t>(it->mode + 1)] = pc.b_prime;
  }

  UnitaryMesh mesh = n >= 2 ? build_layout({LayoutKind::grid, 0}, n) : UnitaryMesh{1, {}, {0.0}, {}};
  auto place = [&](const PlacedMzi& op) {
    auto& layer = mesh.layers.at(static_cast<std::size_t>(op.layer));
    auto found = std::find_if(layer.mzis.begin(), layer.mzis.end(), [&](const Mzi& z) { return z.top == op.mode; });
    if (found == layer.mzis.end()) {
      throw DecompositionError("clements_decompose: no grid slot for layer " + std::to_string(op.layer) +
                               " mode " + std::to_string(op.mode));
    }
    found->params = {wrap_phase(op.theta), wrap_phase(op.phi), 0.0, 0.0};
  };
  for (const auto& op : right_ops) place(op);
  for (const auto& op : left_ops) place(op);
  for (int k = 0; k < n; ++k) mesh.output_phases[static_cast<std::size_t>(k)] = wrap_phase(arg_or_zero(diag[static_cast<std::size_t>(k)]));
  return mesh;
}

SvdTriple svd_triple(const CMatrix& m) {
  SvdResult s = jacobi_svd(m);
  const double beta = s.s.empty() ? 0.0 : s.s.front();
  if (!(beta > 0.0)) throw std::invalid_argument("svd_triple: zero matrix has no normalized decomposition");
  SvdTriple t{std::move(s.u), std::move(s.s), std::move(s.v_dagger), beta};
  for (auto& v : t.sigma) v = std::clamp(v / beta, 0.0, 1.0);
  return t;
}

CMatrix reconstruct(const SvdTriple& t) {
  CMatrix us = t.u;
  for (std::size_t r = 0; r < us.rows(); ++r)
    for (std::size_t c = 0; c < us.cols(); ++c) us(r, c) *= t.beta * t.sigma[c];
  return matmul(us, t.v_dagger);
}

LinearMultiplier multiplier_from_triple(const SvdTriple& t) {
  LinearMultiplier lm;
  lm.v_dagger = clements_decompose(t.v_dagger);
  lm.u = clements_decompose(t.u);
  lm.sigma.beta = t.beta;
  lm.sigma.thetas.resize(t.sigma.size());
  for (std::size_t i = 0; i < t.sigma.size(); ++i) lm.sigma.thetas[i] = 2.0 * std::asin(std::clamp(t.sigma[i], 0.0, 1.0));
  return lm;
}

LinearMultiplier svd_to_multiplier(const CMatrix& m) { return multiplier_from_triple(svd_triple(m)); }

SvdTriple permute_singular(const SvdTriple& t, std::span<const int> perm) {
  const int n = static_cast<int>(t.sigma.size());
  if (!is_permutation(perm, n)) throw std::invalid_argument("permute_singular: not a permutation of [0, n)");
  SvdTriple out{CMatrix(t.u.rows(), t.u.cols()), std::vector<double>(t.sigma.size()),
                CMatrix(t.v_dagger.rows(), t.v_dagger.cols()), t.beta};
  for (int k = 0; k < n; ++k) {
    const auto src = static_cast<std::size_t>(perm[static_cast<std::size_t>(k)]);
    const auto dst = static_cast<std::size_t>(k);
    out.sigma[dst] = t.sigma[src];
    for (std::size_t r = 0; r < t.u.rows(); ++r) out.u(r, dst) = t.u(r, src);
    auto from = t.v_dagger.row(src);
    std::copy(from.begin(), from.end(), out.v_dagger.row(dst).begin());
  }
  return out;
}

std::string to_string(SingularOrder order) { return order == SingularOrder::descending ? "descending" : "random"; }

SingularOrder singular_order_from_string(const std::string& s) {
  if (s == "descending") return SingularOrder::descending;
  if (s == "random") return SingularOrder::random;
  throw std::invalid_argument("unknown singular order '" + s + "'");
}

SvdTriple sort_singular(const SvdTriple& t, SingularOrder order, std::uint64_t seed) {
  const int n = static_cast<int>(t.sigma.size());
  std::vector<int> perm;
  if (order == SingularOrder::descending) {
    perm.resize(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::stable_sort(perm.begin(), perm.end(), [&](int a, int b) {
      return t.sigma[static_cast<std::size_t>(a)] > t.sigma[static_cast<std::size_t>(b)];
    });
  } else {
    Rng rng(seed);
    perm = rng.permutation(n);
  }
  return permute_singular(t, perm);
}

std::vector<int> bit_reversal_permutation(int n) {
  if (n < 1 || !std::has_single_bit(static_cast<unsigned>(n))) {
    throw std::invalid_argument("bit_reversal_permutation: n must be a power of two");
  }
  const int bits = std::countr_zero(static_cast<unsigned>(n));
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    int r = 0;
    for (int b = 0; b < bits; ++b)
      if (i & (1 << b)) r |= 1 << (bits - 1 - b);
    perm[static_cast<std::size_t>(i)] = r;
  }
  return perm;
}

FftConfig fft_configure(int n) {
  if (n < 2 || !std::has_single_bit(static_cast<unsigned>(n))) {
    throw std::invalid_argument("fft_configure: n must be a power of two >= 2");
  }
  FftConfig cfg{build_layout({LayoutKind::fft, 0}, n), bit_reversal_permutation(n)};
  // Per-port phase accumulated from the MZI prefactors of earlier stages.
  std::vector<double> port_phase(static_cast<std::size_t>(n), 0.0);
  for (std::size_t s = 0; s < cfg.mesh.layers.size(); ++s) {
    const int half = 1 << s;
    for (auto& mzi : cfg.mesh.layers[s].mzis) {
      const int k = mzi.top & (half - 1);
      const double twiddle = -kPi * k / half;  // arg of e^{-2 pi i k / (2 half)}
      const double et = port_phase[static_cast<std::size_t>(mzi.top)];
      const double eb = port_phase[static_cast<std::size_t>(mzi.bottom)];
      const double phi = wrap_phase(eb - et - twiddle);
      mzi.params = {kPi / 2.0, phi, 0.0, 0.0};
      // i e^{i pi/4} e^{i phi} prefactor multiplies both outputs.
      const double gamma = wrap_phase(kPi / 2.0 + kPi / 4.0 + phi + et);
      port_phase[static_cast<std::size_t>(mzi.top)] = gamma;
      port_phase[static_cast<std::size_t>(mzi.bottom)] = gamma;
    }
  }
  for (int k = 0; k < n; ++k) cfg.mesh.output_phases[static_cast<std::size_t>(k)] = wrap_phase(-port_phase[static_cast<std::size_t>(k)]);
  return cfg;
}

CVector fft_apply(const FftConfig& cfg, std::span<const cdouble> x) {
  if (static_cast<int>(x.size()) != cfg.mesh.n) throw DimensionError("fft_apply: length mismatch");
  CMatrix col(x.size(), 1, std::vector<cdouble>(x.begin(), x.end()));
  permute_rows(col, cfg.input_permutation);
  apply_inplace(cfg.mesh, col);
  return col.column(0);
}

CVector fft_apply_inverse(const FftConfig& cfg, std::span<const cdouble> x) {
  // The unitary DFT is symmetric, so F^-1 = conj(F) and F^-1 x = conj(F conj(x)).
  CVector c(x.begin(), x.end());
  for (auto& z : c) z = std::conj(z);
  CVector y = fft_apply(cfg, c);
  for (auto& z : y) z = std::conj(z);
  return y;
}

CMatrix fft_transfer(const FftConfig& cfg) {
  CMatrix t = CMatrix::identity(static_cast<std::size_t>(cfg.mesh.n));
  permute_rows(t, cfg.input_permutation);
  apply_inplace(cfg.mesh, t);
  return t;
}

CMatrix dft_matrix(int n) {
  CMatrix f(static_cast<std::size_t>(n), static_cast<std::size_t>(n));
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int k = 0; k < n; ++k)
    for (int m = 0; m < n; ++m) {
      const long long km = static_cast<long long>(k) * m % n;
      f(static_cast<std::size_t>(k), static_cast<std::size_t>(m)) = scale * std::polar(1.0, -2.0 * kPi * static_cast<double>(km) / n);
    }
  return f;
}

CVector circular_convolve(const FftConfig& cfg, std::span<const cdouble> kernel, std::span<const cdouble> x) {
  const auto n = static_cast<std::size_t>(cfg.mesh.n);
  if (kernel.size() != n || x.size() != n) throw DimensionError("circular_convolve: length mismatch");
  CVector xf = fft_apply(cfg, x);
  const CVector kf = fft_apply(cfg, kernel);
  const double scale = std::sqrt(static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k) xf[k] *= scale * kf[k];
  return fft_apply_inverse(cfg, xf);
}

}  // namespace mzinet
