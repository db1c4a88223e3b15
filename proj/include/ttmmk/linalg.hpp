#pragma once

#include <cstddef>
#include <limits>

#include "ttmmk/tensor.hpp"

namespace ttmmk {

inline constexpr std::size_t kUnboundedRank = std::numeric_limits<std::size_t>::max();

/// Rank-r factorization z ~ u * diag(s) * vt with s non-increasing.
struct TruncatedSVD {
  Matrix u;   // n x r, orthonormal columns
  Vector s;   // r
  Matrix vt;  // r x k, orthonormal rows
  std::size_t rank = 0;
};

/**
 * Deterministic truncated SVD.
 *
 * Keeps the smallest r with (sum_{i>r} s_i^2)^{1/2} <= delta, capped at
 * `rmax` (the cap wins when both bind). The zero matrix yields rank 1 with
 * u = e_1, s = [0], vt = 0.
 */
TruncatedSVD svd_truncated(const Matrix& z, double delta,
                           std::size_t rmax = kUnboundedRank);

struct SymmetricEigen {
  Vector values;   // descending
  Matrix vectors;  // orthonormal columns matching `values`
};

SymmetricEigen sym_eig_descending(const Matrix& g);

}  // namespace ttmmk
