#include "mzinet/complex_core.hpp"

#include <algorithm>
#include <cmath>

namespace mzinet {

CMatrix::CMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

CMatrix::CMatrix(std::size_t rows, std::size_t cols, std::vector<cdouble> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("CMatrix: entry count " + std::to_string(data_.size()) + " != " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
}

CMatrix::CMatrix(std::initializer_list<std::initializer_list<cdouble>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("CMatrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

CMatrix CMatrix::identity(std::size_t n) {
  CMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

CMatrix CMatrix::diagonal(std::span<const cdouble> d) {
  CMatrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

CVector CMatrix::column(std::size_t c) const {
  CVector v(rows_);
  for (std::size_t r = 0; r < rows_; ++r) v[r] = (*this)(r, c);
  return v;
}

void CMatrix::set_column(std::size_t c, std::span<const cdouble> v) {
  if (v.size() != rows_) throw DimensionError("set_column: length mismatch");
  for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = v[r];
}

CMatrix& CMatrix::operator*=(cdouble s) {
  for (auto& z : data_) z *= s;
  return *this;
}

bool CMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](cdouble z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

CMatrix matmul(const CMatrix& a, const CMatrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " times " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  CMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const cdouble aik = a(i, k);
      if (aik == cdouble{}) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < brow.size(); ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

CVector matvec(const CMatrix& a, std::span<const cdouble> x) {
  if (a.cols() != x.size()) throw DimensionError("matvec: length mismatch");
  CVector y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    cdouble acc{};
    auto r = a.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) acc += r[j] * x[j];
    y[i] = acc;
  }
  return y;
}

CMatrix dagger(const CMatrix& a) {
  CMatrix d(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) d(j, i) = std::conj(a(i, j));
  return d;
}

CMatrix operator*(cdouble s, CMatrix a) {
  a *= s;
  return a;
}

CMatrix operator-(const CMatrix& a, const CMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("operator-: shape mismatch");
  CMatrix c = a;
  auto ce = c.entries();
  auto be = b.entries();
  for (std::size_t i = 0; i < ce.size(); ++i) ce[i] -= be[i];
  return c;
}

cdouble trace(const CMatrix& a) {
  if (!a.square()) throw DimensionError("trace: matrix not square");
  cdouble t{};
  for (std::size_t i = 0; i < a.rows(); ++i) t += a(i, i);
  return t;
}

double max_abs(const CMatrix& a) {
  double m = 0.0;
  for (cdouble z : a.entries()) m = std::max(m, std::abs(z));
  return m;
}

double max_abs_diff(const CMatrix& a, const CMatrix& b) { return max_abs(a - b); }

double frobenius_norm(const CMatrix& a) {
  double s = 0.0;
  for (cdouble z : a.entries()) s += std::norm(z);
  return std::sqrt(s);
}

double norm2(std::span<const cdouble> x) {
  double s = 0.0;
  for (cdouble z : x) s += std::norm(z);
  return std::sqrt(s);
}

double unitarity_error(const CMatrix& a) {
  if (!a.square()) return INFINITY;
  CMatrix g = matmul(dagger(a), a);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
  return max_abs(g);
}

double fidelity(const CMatrix& u0, const CMatrix& u, double tol) {
  if (!u0.square() || !u.square() || u0.rows() != u.rows()) {
    throw DimensionError("fidelity: operands must be square and of equal size");
  }
  if (unitarity_error(u0) > tol || unitarity_error(u) > tol) {
    throw NotUnitaryError("fidelity: operand is not unitary within tolerance");
  }
  // Tr(U^H U0) = sum_ij conj(U_ij) U0_ij
  cdouble t{};
  auto ue = u.entries();
  auto u0e = u0.entries();
  for (std::size_t i = 0; i < ue.size(); ++i) t += std::conj(ue[i]) * u0e[i];
  return std::norm(t / static_cast<double>(u.rows()));
}

CMatrix random_complex_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  CMatrix m(rows, cols);
  for (auto& z : m.entries()) {
    const double re = rng.normal();
    const double im = rng.normal();
    z = cdouble(re, im) * std::sqrt(0.5);
  }
  return m;
}

CMatrix haar_random_unitary(std::size_t n, Rng& rng) {
  CMatrix q = random_complex_matrix(n, n, rng);
  // Modified Gram-Schmidt on columns, applied twice for orthogonality at
  // machine precision. R's diagonal is real positive by construction.
  for (std::size_t j = 0; j < n; ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < j; ++k) {
        cdouble dot{};
        for (std::size_t r = 0; r < n; ++r) dot += std::conj(q(r, k)) * q(r, j);
        for (std::size_t r = 0; r < n; ++r) q(r, j) -= dot * q(r, k);
      }
    }
    double nrm = 0.0;
    for (std::size_t r = 0; r < n; ++r) nrm += std::norm(q(r, j));
    nrm = std::sqrt(nrm);
    for (std::size_t r = 0; r < n; ++r) q(r, j) /= nrm;
  }
  return q;
}

CMatrix haar_random_unitary(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return haar_random_unitary(n, rng);
}

}  // namespace mzinet
