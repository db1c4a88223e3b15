#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "ttmmk/tensor.hpp"

namespace ttmmk {

/**
 * Tensor train: x(i_1..i_M) = G1(:, i_1, :) G2(:, i_2, :) ... GM(:, i_M, :).
 *
 * Core m is an order-3 tensor of shape R_{m-1} x I_m x R_m. Because storage
 * is column-major, the flat buffer of core m < M is exactly the left
 * singular factor U_m (rows indexed by r_{m-1} + i_m R_{m-1}).
 */
struct TTDecomposition {
  std::vector<DenseTensor> cores;
  std::vector<std::size_t> ranks;  // R_0 .. R_M

  std::size_t order() const noexcept { return cores.size(); }
  std::vector<std::size_t> dims() const;

  /// Throws ShapeChain if core shapes and ranks are inconsistent.
  void validate() const;

  friend bool operator==(const TTDecomposition&, const TTDecomposition&) = default;
};

/// Truncation policy for `tt_svd_unique`.
struct TTRankPolicy {
  enum class Kind { Threshold, FixedRank };
  Kind kind = Kind::FixedRank;
  double epsilon = 0.0;   // relative error threshold (Threshold)
  std::size_t rank = 1;   // uniform rank cap (FixedRank)

  static TTRankPolicy threshold(double eps) { return {Kind::Threshold, eps, 0}; }
  static TTRankPolicy fixed_rank(std::size_t r) { return {Kind::FixedRank, 0.0, r}; }
};

/**
 * TT-SVD with sign canonicalization of every left singular vector.
 *
 * Threshold mode uses the per-step truncation delta = eps * ||x||_F / sqrt(M-1),
 * which gives ||x - reconstruct||_F <= eps ||x||_F. With
 * `enforce_uniqueness == false` the raw SVD signs are kept (ablation only).
 */
TTDecomposition tt_svd_unique(const DenseTensor& x, const TTRankPolicy& policy,
                              bool enforce_uniqueness = true);

/// Flips (u_r, vt_r) pairs so each u column's max-modulus entry is positive;
/// ties go to the first such entry.
std::pair<Matrix, Matrix> canonicalize_signs(Matrix u, Matrix vt);

DenseTensor tt_reconstruct(const TTDecomposition& t);

}  // namespace ttmmk
