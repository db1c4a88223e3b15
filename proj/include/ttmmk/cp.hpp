#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ttmmk/tensor.hpp"
#include "ttmmk/tt.hpp"

namespace ttmmk {

/// Kruskal form: x = sum_r H1(:, r) o H2(:, r) o ... o HM(:, r).
struct CPDecomposition {
  std::vector<Matrix> factors;  // factor m is I_m x R

  std::size_t order() const noexcept { return factors.size(); }
  std::size_t rank() const noexcept {
    return factors.empty() ? 0 : static_cast<std::size_t>(factors.front().cols());
  }
  std::vector<std::size_t> dims() const;

  /// Throws DimensionMismatch unless every factor has the same column count.
  void validate() const;
};

/// Exact TT -> CP expansion by merging r = r_1 + r_2 R_1 + ... (r_1 fastest).
CPDecomposition tt_to_cp(const TTDecomposition& t);

/// Rescales each rank-one term so that all M columns have norm n_r^{1/M}.
/// Terms with a zero column in any mode are zeroed in every mode.
CPDecomposition equilibrate_norms(const CPDecomposition& c);

DenseTensor cp_reconstruct(const CPDecomposition& c);

struct CpAlsOptions {
  std::size_t rank = 1;
  std::size_t max_sweeps = 100;
  double tol = 1e-8;
  std::uint64_t seed = 0;
};

struct CpAlsResult {
  CPDecomposition cp;
  std::vector<double> residuals;  // relative residual after each sweep
};

/// Alternating least squares CP fit, initialised from U[-1, 1] entries.
CpAlsResult cp_als(const DenseTensor& x, const CpAlsOptions& options);

}  // namespace ttmmk
