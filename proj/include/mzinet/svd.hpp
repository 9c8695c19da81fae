#pragma once

#include <stdexcept>
#include <vector>

#include "mzinet/complex_core.hpp"

namespace mzinet {

class SvdError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A = U diag(s) V^dagger with s sorted descending.
struct SvdResult {
  CMatrix u;
  std::vector<double> s;
  CMatrix v_dagger;
};

/// One-sided (Hestenes) Jacobi SVD of a square complex matrix.
/// Throws SvdError when the sweeps fail to converge.
SvdResult jacobi_svd(const CMatrix& a, int max_sweeps = 60);

}  // namespace mzinet
