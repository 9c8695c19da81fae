#pragma once

// Dense complex linear algebra shared by every other module: matrices, vectors,
// the unitary fidelity metric and a Haar-random unitary sampler.

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mzinet/rng.hpp"

namespace mzinet {

using cdouble = std::complex<double>;
using CVector = std::vector<cdouble>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NotUnitaryError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Row-major dense complex matrix.
class CMatrix {
 public:
  CMatrix() = default;
  CMatrix(std::size_t rows, std::size_t cols);
  CMatrix(std::size_t rows, std::size_t cols, std::vector<cdouble> entries);
  CMatrix(std::initializer_list<std::initializer_list<cdouble>> rows);

  static CMatrix identity(std::size_t n);
  static CMatrix diagonal(std::span<const cdouble> d);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool square() const { return rows_ == cols_; }

  cdouble& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const cdouble& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<cdouble> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const cdouble> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<cdouble> entries() { return data_; }
  std::span<const cdouble> entries() const { return data_; }

  CVector column(std::size_t c) const;
  void set_column(std::size_t c, std::span<const cdouble> v);

  CMatrix& operator*=(cdouble s);
  bool all_finite() const;

  friend bool operator==(const CMatrix&, const CMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cdouble> data_;
};

CMatrix matmul(const CMatrix& a, const CMatrix& b);
CVector matvec(const CMatrix& a, std::span<const cdouble> x);
CMatrix dagger(const CMatrix& a);
CMatrix operator*(cdouble s, CMatrix a);
CMatrix operator-(const CMatrix& a, const CMatrix& b);
cdouble trace(const CMatrix& a);

double max_abs(const CMatrix& a);
double max_abs_diff(const CMatrix& a, const CMatrix& b);
double frobenius_norm(const CMatrix& a);
double norm2(std::span<const cdouble> x);

/// max |(A^H A - I)_ij|.
double unitarity_error(const CMatrix& a);

/// |Tr(U^H U0) / N|^2. Both arguments must be square, same size and unitary
/// within `tol`.
double fidelity(const CMatrix& u0, const CMatrix& u, double tol = 1e-8);

/// Haar-distributed unitary: Gram-Schmidt QR of a complex Ginibre matrix, which
/// leaves R with a positive real diagonal.
CMatrix haar_random_unitary(std::size_t n, Rng& rng);
CMatrix haar_random_unitary(std::size_t n, std::uint64_t seed);

/// Matrix with i.i.d. standard complex normal entries.
CMatrix random_complex_matrix(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace mzinet
