#include "mzinet/svd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mzinet {

namespace {

// Completes column j of q to a unit vector orthogonal to the columns in `done`.
void complete_column(CMatrix& q, std::size_t j, const std::vector<std::size_t>& done) {
  const std::size_t n = q.rows();
  for (std::size_t e = 0; e < n; ++e) {
    CVector v(n);
    v[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k : done) {
        cdouble dot{};
        for (std::size_t r = 0; r < n; ++r) dot += std::conj(q(r, k)) * v[r];
        for (std::size_t r = 0; r < n; ++r) v[r] -= dot * q(r, k);
      }
    }
    const double nrm = norm2(v);
    if (nrm > 0.5) {
      for (std::size_t r = 0; r < n; ++r) q(r, j) = v[r] / nrm;
      return;
    }
  }
  throw SvdError("jacobi_svd: could not complete orthonormal basis");
}

}  // namespace

SvdResult jacobi_svd(const CMatrix& a, int max_sweeps) {
  if (!a.square()) throw DimensionError("jacobi_svd: square matrices only");
  if (!a.all_finite()) throw SvdError("jacobi_svd: non-finite input");
  const std::size_t n = a.rows();
  // Work on columns stored as rows of the transpose for contiguous access.
  CMatrix w = dagger(a);  // row k = conj(column k of a)
  for (auto& z : w.entries()) z = std::conj(z);
  CMatrix v = CMatrix::identity(n);  // rows = columns of V (transposed storage)

  constexpr double eps = std::numeric_limits<double>::epsilon();
  // Columns below this squared norm are numerically zero and never rotated.
  const double floor = std::pow(static_cast<double>(n) * eps * frobenius_norm(a), 2);
  bool converged = n <= 1;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        auto ap = w.row(p);
        auto aq = w.row(q);
        double alpha = 0.0, beta = 0.0;
        cdouble gamma{};
        for (std::size_t r = 0; r < n; ++r) {
          alpha += std::norm(ap[r]);
          beta += std::norm(aq[r]);
          gamma += std::conj(ap[r]) * aq[r];
        }
        const double g = std::abs(gamma);
        if (g == 0.0 || g <= eps * std::sqrt(alpha * beta) || alpha <= floor || beta <= floor) continue;
        converged = false;
        const cdouble phase = gamma / g;  // e^{i psi}
        const double zeta = (beta - alpha) / (2.0 * g);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        const cdouble sp = s * std::conj(phase);  // s e^{-i psi}
        for (std::size_t r = 0; r < n; ++r) {
          const cdouble x = ap[r];
          const cdouble y = aq[r];
          ap[r] = c * x - sp * y;
          aq[r] = s * x + c * std::conj(phase) * y;
        }
        auto vp = v.row(p);
        auto vq = v.row(q);
        for (std::size_t r = 0; r < n; ++r) {
          const cdouble x = vp[r];
          const cdouble y = vq[r];
          vp[r] = c * x - sp * y;
          vq[r] = s * x + c * std::conj(phase) * y;
        }
      }
    }
  }
  if (!converged) throw SvdError("jacobi_svd: no convergence after " + std::to_string(max_sweeps) + " sweeps");

  std::vector<double> sv(n);
  for (std::size_t k = 0; k < n; ++k) sv[k] = norm2(w.row(k));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sv[x] > sv[y]; });

  SvdResult out{CMatrix(n, n), std::vector<double>(n), CMatrix(n, n)};
  const double smax = n ? sv[order[0]] : 0.0;
  const double tiny = smax * static_cast<double>(n) * eps;
  std::vector<std::size_t> done;
  std::vector<std::size_t> deficient;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t k = order[j];
    out.s[j] = sv[k];
    for (std::size_t r = 0; r < n; ++r) out.v_dagger(j, r) = std::conj(v(k, r));
    if (sv[k] > tiny && sv[k] > 0.0) {
      for (std::size_t r = 0; r < n; ++r) out.u(r, j) = w(k, r) / sv[k];
      done.push_back(j);
    } else {
      deficient.push_back(j);
    }
  }
  for (std::size_t j : deficient) {
    complete_column(out.u, j, done);
    done.push_back(j);
  }
  return out;
}

}  // namespace mzinet
